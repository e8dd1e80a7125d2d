//! Derivative-free simplex minimisation.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NelderMeadOptions {
    /// Stop when every vertex is within `tol` (max-norm) of the best one.
    pub tol: f64,
    pub max_iter: usize,
    /// Initial step as a fraction of each coordinate's magnitude.
    pub init_scale: f64,
    /// Lower bound on the initial step.
    pub init_floor: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self { tol: 1e-9, max_iter: 5000, init_scale: 0.05, init_floor: 1e-2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// `(iteration, best value)` each time the best value improves.
    pub trace: Vec<(usize, f64)>,
    /// Best point at each trace entry.
    #[serde(skip)]
    pub trace_points: Vec<Vec<f64>>,
}

const ALPHA: f64 = 1.0;
const GAMMA: f64 = 2.0;
const RHO: f64 = 0.5;
const SIGMA: f64 = 0.5;

/// Minimise `f` from `x0` with the standard reflection / expansion /
/// contraction / shrink rules. Non-finite objective values rank last.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], opts: &NelderMeadOptions) -> NelderMeadResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let mut evaluations = 0;
    let mut eval = |x: &[f64]| {
        evaluations += 1;
        let v = f(x);
        if v.is_nan() { f64::INFINITY } else { v }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), eval(x0)));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += (opts.init_scale * x0[i].abs()).max(opts.init_floor);
        let v = eval(&x);
        simplex.push((x, v));
    }
    order(&mut simplex);
    let mut trace = vec![(0, simplex[0].1)];
    let mut trace_points = vec![simplex[0].0.clone()];
    let mut iterations = 0;
    let mut converged = n == 0;

    while !converged && iterations < opts.max_iter {
        if diameter(&simplex) < opts.tol {
            converged = true;
            break;
        }
        iterations += 1;
        let centroid = centroid(&simplex[..n]);
        let worst = simplex[n].clone();
        let second = simplex[n - 1].1;
        let best = simplex[0].1;

        let xr = affine(&centroid, &worst.0, -ALPHA);
        let fr = eval(&xr);
        if fr < best {
            let xe = affine(&centroid, &worst.0, -GAMMA);
            let fe = eval(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < second {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst.1 {
                let xc = affine(&centroid, &xr, RHO);
                let fc = eval(&xc);
                (xc, fc)
            } else {
                let xc = affine(&centroid, &worst.0, RHO);
                let fc = eval(&xc);
                (xc, fc)
            };
            if fc < worst.1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let x_best = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    let x = affine(&x_best, &vertex.0, SIGMA);
                    let v = eval(&x);
                    *vertex = (x, v);
                }
            }
        }
        order(&mut simplex);
        if simplex[0].1 < trace.last().map_or(f64::INFINITY, |t| t.1) {
            trace.push((iterations, simplex[0].1));
            trace_points.push(simplex[0].0.clone());
        }
    }
    if !converged && diameter(&simplex) < opts.tol {
        converged = true;
    }
    let (x, f) = simplex.swap_remove(0);
    NelderMeadResult { x, f, iterations, evaluations, converged, trace, trace_points }
}

fn order(simplex: &mut [(Vec<f64>, f64)]) {
    // stable sort keeps older vertices first on ties, so the run is deterministic
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
}

fn centroid(points: &[(Vec<f64>, f64)]) -> Vec<f64> {
    let n = points.len() as f64;
    let mut c = vec![0.0; points[0].0.len()];
    for (x, _) in points {
        for (ci, xi) in c.iter_mut().zip(x) {
            *ci += xi / n;
        }
    }
    c
}

/// `c + t (x - c)`.
fn affine(c: &[f64], x: &[f64], t: f64) -> Vec<f64> {
    c.iter().zip(x).map(|(ci, xi)| ci + t * (xi - ci)).collect()
}

fn diameter(simplex: &[(Vec<f64>, f64)]) -> f64 {
    let best = &simplex[0].0;
    simplex[1..]
        .iter()
        .flat_map(|(x, _)| x.iter().zip(best).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl() {
        let r = nelder_mead(|x| (x[0] - 3.0).powi(2), &[0.0], &NelderMeadOptions::default());
        assert!(r.converged);
        assert!((r.x[0] - 3.0).abs() < 1e-6);
    }

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2);
        let opts = NelderMeadOptions { init_scale: 0.1, ..Default::default() };
        let r = nelder_mead(f, &[-1.2, 1.0], &opts);
        assert!((r.x[0] - 1.0).abs() < 1e-4 && (r.x[1] - 1.0).abs() < 1e-4, "{:?}", r.x);
    }

    #[test]
    fn best_value_is_monotone() {
        let f = |x: &[f64]| if x[0] > 0.5 { 1e8 } else { (x[0] + 1.0).powi(2) + x[1] * x[1] };
        let r = nelder_mead(f, &[0.0, 0.3], &NelderMeadOptions::default());
        for w in r.trace.windows(2) {
            assert!(w[1].1 < w[0].1);
        }
        assert!(r.f < 1e8);
        assert!(r.x[0] <= 0.5);
    }

    #[test]
    fn nan_ranks_last() {
        let f = |x: &[f64]| if x[0] < 0.0 { f64::NAN } else { (x[0] - 1.0).powi(2) };
        let r = nelder_mead(f, &[0.2], &NelderMeadOptions::default());
        assert!((r.x[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn iteration_cap_reports_not_converged() {
        let opts = NelderMeadOptions { max_iter: 3, ..Default::default() };
        let r = nelder_mead(|x| x[0] * x[0] + x[1] * x[1], &[5.0, 5.0], &opts);
        assert!(!r.converged);
        assert_eq!(r.iterations, 3);
    }
}
