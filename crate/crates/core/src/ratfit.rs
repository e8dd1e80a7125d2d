//! Vector fitting of complex, non-conjugate-symmetric frequency responses.
//!
//! The model is `d + sum_n r_n / (s - a_n)` with complex poles and residues
//! and a real asymptote `d`, so the result converts to a ZPK with real gain.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gains::{gain_at, zpk_eval, RootUnit, ZpkFile};
use crate::model::{DerivedRates, GainModel, Zpk};

#[derive(Debug, Clone)]
pub struct FitProblem {
    /// `(s, value)` pairs with `s` on the imaginary axis, rad/s.
    pub samples: Vec<(Complex64, Complex64)>,
    pub n_poles: usize,
    pub iterations: usize,
    /// Per-sample weights; empty means unit weights.
    pub weights: Vec<f64>,
}

impl FitProblem {
    pub fn new(samples: Vec<(Complex64, Complex64)>, n_poles: usize) -> Self {
        Self { samples, n_poles, iterations: 20, weights: Vec::new() }
    }

    fn validate(&self) -> Result<()> {
        if self.n_poles == 0 {
            return Err(Error::InvalidArgument("vector fit needs at least one pole".into()));
        }
        if self.samples.len() < 2 * self.n_poles + 2 {
            return Err(Error::InvalidArgument(format!(
                "{} samples is too few for {} poles (need {})",
                self.samples.len(),
                self.n_poles,
                2 * self.n_poles + 2
            )));
        }
        if !self.weights.is_empty() && self.weights.len() != self.samples.len() {
            return Err(Error::InvalidArgument("one weight per sample is required".into()));
        }
        if self.weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidArgument("weights must be positive".into()));
        }
        let mut abscissae: Vec<f64> = self.samples.iter().map(|(s, _)| s.im).collect();
        abscissae.sort_by(f64::total_cmp);
        if abscissae.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument("sample abscissae must be distinct".into()));
        }
        Ok(())
    }

    fn weight(&self, i: usize) -> f64 {
        self.weights.get(i).copied().unwrap_or(1.0)
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub zpk: Zpk,
    pub max_rel_err: f64,
    /// Pole set after every relocation, rad/s.
    pub pole_history: Vec<Vec<Complex64>>,
}

const POLE_TOL: f64 = 1e-8;

/// Fit `problem.n_poles` stable poles to the samples.
pub fn vector_fit(problem: &FitProblem) -> Result<FitResult> {
    problem.validate()?;
    let (lo, hi) = problem
        .samples
        .iter()
        .map(|(s, _)| s.im.abs())
        .fold((f64::INFINITY, 0.0f64), |(a, b), w| (a.min(w), b.max(w)));
    let mut poles = initial_poles(lo.max(hi * 1e-6), hi, problem.n_poles);
    let mut history = vec![poles.clone()];

    for iteration in 0..problem.iterations {
        let sigma = match relocation_residues(problem, &poles, iteration) {
            Ok(sigma) => sigma,
            // the data is already explained exactly by fewer poles; keep the current set
            Err(Error::IllPosedFit { .. }) if exact_with(problem, &poles, iteration)? => break,
            Err(e) => return Err(e),
        };
        let mut next = eigenvalues(companion(&poles, &sigma, Complex64::new(1.0, 0.0)))?;
        for p in next.iter_mut() {
            if p.re >= 0.0 {
                p.re = -p.re.abs().max(f64::MIN_POSITIVE);
            }
        }
        next.sort_by(|a, b| a.im.total_cmp(&b.im).then(a.re.total_cmp(&b.re)));
        let moved = poles
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).norm() / a.norm().max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max);
        poles = next;
        history.push(poles.clone());
        if moved < POLE_TOL {
            break;
        }
    }

    let (residues, d) = final_residues(problem, &poles, problem.iterations)?;
    if d.is_nan() || d <= 0.0 {
        return Err(Error::InvalidArgument(format!("fitted asymptotic gain {d} is not positive")));
    }
    let scaled: Vec<Complex64> = residues.iter().map(|r| r / d).collect();
    let zeros = eigenvalues(companion(&poles, &scaled, Complex64::new(1.0, 0.0)))?;
    let zpk = Zpk::new(zeros, poles, d)?;
    let max_rel_err = max_relative_error(&zpk, &problem.samples)?;
    Ok(FitResult { zpk, max_rel_err, pole_history: history })
}

fn exact_with(problem: &FitProblem, poles: &[Complex64], iteration: usize) -> Result<bool> {
    let (residues, d) = final_residues(problem, poles, iteration)?;
    let worst = problem
        .samples
        .iter()
        .map(|(s, v)| {
            let fit: Complex64 = d + residues.iter().zip(poles).map(|(r, a)| r / (s - a)).sum::<Complex64>();
            (fit - v).norm() / v.norm().max(f64::MIN_POSITIVE)
        })
        .fold(0.0, f64::max);
    Ok(worst < 1e-10)
}

/// `max |G(s_i) - v_i| / |v_i|` over the samples.
pub fn max_relative_error(zpk: &Zpk, samples: &[(Complex64, Complex64)]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (s, v) in samples {
        let g = zpk_eval(zpk, *s)?;
        worst = worst.max((g - v).norm() / v.norm().max(f64::MIN_POSITIVE));
    }
    Ok(worst)
}

fn initial_poles(lo: f64, hi: f64, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|k| {
            let w = if n == 1 { (lo * hi).sqrt() } else { lo * (hi / lo).powf(k as f64 / (n - 1) as f64) };
            Complex64::new(-w / 100.0, w)
        })
        .collect()
}

/// `diag(a) - 1 c^T / scale`; its eigenvalues are the zeros of
/// `1 + sum c_n / (s - a_n)`.
fn companion(a: &[Complex64], c: &[Complex64], scale: Complex64) -> DMatrix<Complex64> {
    let n = a.len();
    DMatrix::from_fn(n, n, |i, j| {
        let diag = if i == j { a[i] } else { Complex64::new(0.0, 0.0) };
        diag - c[j] / scale
    })
}

fn eigenvalues(m: DMatrix<Complex64>) -> Result<Vec<Complex64>> {
    let n = m.nrows();
    if n == 1 {
        return Ok(vec![m[(0, 0)]]);
    }
    let schur = nalgebra::Schur::new(m);
    let (_, t) = schur.unpack();
    Ok((0..n).map(|i| t[(i, i)]).collect())
}

/// Real least-squares system for complex unknowns: each complex equation
/// contributes a real and an imaginary row, each complex unknown two columns.
struct RealSystem {
    a: DMatrix<f64>,
    b: DVector<f64>,
}

impl RealSystem {
    fn new(rows: usize, cols: usize) -> Self {
        Self { a: DMatrix::zeros(2 * rows, cols), b: DVector::zeros(2 * rows) }
    }

    fn set_complex(&mut self, row: usize, col: usize, c: Complex64) {
        self.a[(2 * row, col)] = c.re;
        self.a[(2 * row, col + 1)] = -c.im;
        self.a[(2 * row + 1, col)] = c.im;
        self.a[(2 * row + 1, col + 1)] = c.re;
    }

    fn set_real(&mut self, row: usize, col: usize, c: Complex64) {
        self.a[(2 * row, col)] = c.re;
        self.a[(2 * row + 1, col)] = c.im;
    }

    fn set_rhs(&mut self, row: usize, v: Complex64) {
        self.b[2 * row] = v.re;
        self.b[2 * row + 1] = v.im;
    }

    /// Column-scaled QR solve; rank deficiency is reported as an ill-posed fit.
    fn solve(mut self, iteration: usize) -> Result<DVector<f64>> {
        let cols = self.a.ncols();
        let mut scale = vec![1.0; cols];
        for (j, sc) in scale.iter_mut().enumerate() {
            let norm = self.a.column(j).norm();
            if norm > 0.0 {
                *sc = 1.0 / norm;
                self.a.column_mut(j).scale_mut(*sc);
            }
        }
        let qr = self.a.qr();
        let r = qr.r();
        let diag_max = (0..cols).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
        if (0..cols).any(|i| r[(i, i)].abs() <= 1e-13 * diag_max) || diag_max == 0.0 {
            return Err(Error::IllPosedFit { iteration });
        }
        let qtb = qr.q().transpose() * &self.b;
        let mut x = r.solve_upper_triangular(&qtb).ok_or(Error::IllPosedFit { iteration })?;
        for (xi, sc) in x.iter_mut().zip(&scale) {
            *xi *= sc;
        }
        Ok(x)
    }
}

/// Residues of the weighting function `sigma` for the current poles.
fn relocation_residues(problem: &FitProblem, poles: &[Complex64], iteration: usize) -> Result<Vec<Complex64>> {
    let n = poles.len();
    // columns: r_n (2n), d (1), sigma residues (2n)
    let mut sys = RealSystem::new(problem.samples.len(), 4 * n + 1);
    for (i, (s, f)) in problem.samples.iter().enumerate() {
        let w = problem.weight(i);
        for (k, a) in poles.iter().enumerate() {
            let basis = 1.0 / (s - a);
            sys.set_complex(i, 2 * k, w * basis);
            sys.set_complex(i, 2 * n + 1 + 2 * k, -w * f * basis);
        }
        sys.set_real(i, 2 * n, Complex64::new(w, 0.0));
        sys.set_rhs(i, w * f);
    }
    let x = sys.solve(iteration)?;
    Ok((0..n).map(|k| Complex64::new(x[2 * n + 1 + 2 * k], x[2 * n + 2 + 2 * k])).collect())
}

/// Residues and real asymptote for fixed poles.
fn final_residues(problem: &FitProblem, poles: &[Complex64], iteration: usize) -> Result<(Vec<Complex64>, f64)> {
    let n = poles.len();
    let mut sys = RealSystem::new(problem.samples.len(), 2 * n + 1);
    for (i, (s, f)) in problem.samples.iter().enumerate() {
        let w = problem.weight(i);
        for (k, a) in poles.iter().enumerate() {
            sys.set_complex(i, 2 * k, w / (s - a));
        }
        sys.set_real(i, 2 * n, Complex64::new(w, 0.0));
        sys.set_rhs(i, w * f);
    }
    let x = sys.solve(iteration)?;
    let residues = (0..n).map(|k| Complex64::new(x[2 * k], x[2 * k + 1])).collect();
    Ok((residues, x[2 * n]))
}

/// Default fitting band `[gamma_s (1 + 1e-6), 2 pi 1e5]` rad/s.
pub fn default_seed_band(rates: &DerivedRates) -> (f64, f64) {
    (rates.gamma_s * (1.0 + 1e-6), 2.0 * std::f64::consts::PI * 1e5)
}

/// Samples of the optimal gain on `n_samples` log-spaced frequencies.
pub fn gopt_samples(rates: &DerivedRates, band: (f64, f64), n_samples: usize) -> Result<Vec<(Complex64, Complex64)>> {
    let (lo, hi) = band;
    if !(lo > 0.0 && hi > lo && n_samples >= 2) {
        return Err(Error::InvalidArgument(format!("fit band [{lo}, {hi}] with {n_samples} samples is invalid")));
    }
    (0..n_samples)
        .map(|i| {
            let w = lo * (hi / lo).powf(i as f64 / (n_samples - 1) as f64);
            let s = Complex64::new(0.0, w);
            gain_at(&GainModel::Optimal, s, rates).map(|g| (s, g))
        })
        .collect()
}

/// Fit of the optimal gain on the positive-frequency band.
pub fn fit_gopt(rates: &DerivedRates, n_poles: usize, band: (f64, f64), n_samples: usize) -> Result<FitResult> {
    vector_fit(&FitProblem::new(gopt_samples(rates, band, n_samples)?, n_poles))
}

/// Stable rational approximation of the optimal gain, used as an optimizer seed.
///
/// The band is mirrored onto negative frequencies. A one-sided fit tracks
/// `G_opt` more closely but leaves the closed loop unstable, which the
/// optimizer rejects; the mirrored fit has near-real poles and a feasible loop.
pub fn seed_from_gopt(rates: &DerivedRates, n_poles: usize, band: (f64, f64), n_samples: usize) -> Result<FitResult> {
    let positive = gopt_samples(rates, band, n_samples)?;
    let mut samples = Vec::with_capacity(2 * positive.len());
    for (s, _) in positive.iter().rev() {
        samples.push((-s, gain_at(&GainModel::Optimal, -s, rates)?));
    }
    samples.extend(positive);
    vector_fit(&FitProblem::new(samples, n_poles))
}

#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub zpk: ZpkFile,
    pub max_rel_err: f64,
    /// Pole sets per relocation, Hz.
    pub pole_history_hz: Vec<Vec<[f64; 2]>>,
}

impl FitReport {
    pub fn new(fit: &FitResult) -> Self {
        let to_hz = |p: &Complex64| [p.re / (2.0 * std::f64::consts::PI), p.im / (2.0 * std::f64::consts::PI)];
        Self {
            zpk: ZpkFile::from_zpk(&fit.zpk, RootUnit::Hz),
            max_rel_err: fit.max_rel_err,
            pole_history_hz: fit.pole_history.iter().map(|set| set.iter().map(to_hz).collect()).collect(),
        }
    }
}
