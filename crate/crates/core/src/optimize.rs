//! Stability-penalised search for rational filter gains.

use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::gains::{RootUnit, ZpkFile};
use crate::model::{derive_rates, DerivedRates, GainModel, InterferometerConfig, Zpk};
use crate::nelder_mead::{nelder_mead, NelderMeadOptions};
use crate::quadrature::QuadOptions;
use crate::response::{half_fsr_band, integral_enhancement_with, Homodyne};
use crate::stability::{nyquist, zpk_poles_above, NyquistOptions, NyquistReport, Verdict};
use crate::transfer::DelayMode;

#[derive(Debug, Clone, Copy)]
pub struct CostOptions {
    /// Penalty weight `W`.
    pub weight: f64,
    /// Open-loop pole margin `M_UG`, rad/s.
    pub margin_ug: f64,
    /// Minimum distance of the Nyquist curve to `-1`.
    pub margin_rho: f64,
    /// Integration band, rad/s. `None` selects `[0, pi / (2 tau_s)]`.
    pub band: Option<(f64, f64)>,
    pub nyquist: NyquistOptions,
    pub quad: QuadOptions,
    pub mode: DelayMode,
}

impl Default for CostOptions {
    fn default() -> Self {
        Self {
            weight: 1e8,
            margin_ug: 2.0 * PI * 1e-2,
            margin_rho: 1e-4,
            band: None,
            nyquist: NyquistOptions::default(),
            quad: QuadOptions::default(),
            mode: DelayMode::Exact,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostBreakdown {
    pub neg_normalized_i: f64,
    pub n_ug: usize,
    pub n_ucl: usize,
    pub rho_penalty: f64,
    pub total: f64,
    /// Homodyne angle maximising the integral.
    pub phi_lo: f64,
    pub rho_min: f64,
}

impl CostBreakdown {
    pub fn penalised(&self) -> bool {
        self.n_ug > 0 || self.n_ucl > 0 || self.rho_penalty > 0.0
    }
}

/// `-I/I0 + W (n_ug + n_ucl + rho_penalty)`.
///
/// `n_ug` counts filter poles with `Re p > -M_UG` (each pole once), `n_ucl` is
/// the magnitude of the Nyquist winding number, and the distance penalty is
/// `1 - rho_min / M_rho` below the margin. An indeterminate Nyquist verdict
/// counts as one closed-loop violation with full distance penalty. For
/// penalised points the enhancement term is floored at `-W / 2`, so that an
/// integrand blowing up near a closed-loop pole cannot outweigh the penalty.
pub fn cost(rates: &DerivedRates, zpk: &Zpk, opts: &CostOptions) -> Result<CostBreakdown> {
    zpk.validate()?;
    let model = GainModel::Rational(zpk.clone());
    let n_ug = zpk_poles_above(zpk, opts.margin_ug);
    let (n_ucl, rho_min) = match nyquist(rates, &model, &opts.nyquist) {
        Ok(rep) => (rep.n.unsigned_abs() as usize, rep.rho_min),
        Err(Error::Indeterminate { .. }) => (1, 0.0),
        Err(e) => return Err(e),
    };
    let rho_penalty = if rho_min >= opts.margin_rho { 0.0 } else { 1.0 - rho_min / opts.margin_rho };
    let penalty = n_ug as f64 + n_ucl as f64 + rho_penalty;

    let band = opts.band.unwrap_or_else(|| half_fsr_band(rates));
    let integral = integral_enhancement_with(rates, &model, Homodyne::GlobalOptimal, band, opts.mode, opts.quad);
    let (mut neg_i, phi_lo) = match integral {
        Ok(i) => (-i.normalized, i.phi_lo.unwrap_or(0.0)),
        Err(e) if penalty == 0.0 => return Err(e),
        Err(_) => (0.0, 0.0),
    };
    if penalty > 0.0 {
        neg_i = neg_i.max(-0.5 * opts.weight);
    }
    Ok(CostBreakdown {
        neg_normalized_i: neg_i,
        n_ug,
        n_ucl,
        rho_penalty,
        total: neg_i + opts.weight * penalty,
        phi_lo,
        rho_min,
    })
}

/// [`cost`] with the parameter vector attached to any error.
pub fn cost_at(rates: &DerivedRates, params: &[f64], n_zeros: usize, opts: &CostOptions) -> Result<CostBreakdown> {
    let zpk = unpack(params, n_zeros)?;
    cost(rates, &zpk, opts).map_err(|e| Error::Cost { params: params.to_vec(), source: Box::new(e) })
}

/// `[Re z_i, Im z_i, Re p_j, Im p_j, ln K]`.
pub fn pack(zpk: &Zpk) -> Vec<f64> {
    let mut v = Vec::with_capacity(2 * (zpk.zeros.len() + zpk.poles.len()) + 1);
    for r in zpk.zeros.iter().chain(&zpk.poles) {
        v.push(r.re);
        v.push(r.im);
    }
    v.push(zpk.k.ln());
    v
}

pub fn unpack(params: &[f64], n_zeros: usize) -> Result<Zpk> {
    if params.len() < 2 * n_zeros + 1 || !(params.len() - 1).is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!("parameter vector of length {} does not describe a ZPK", params.len())));
    }
    let roots: Vec<Complex64> = params[..params.len() - 1].chunks(2).map(|c| Complex64::new(c[0], c[1])).collect();
    let (zeros, poles) = roots.split_at(n_zeros);
    Zpk::new(zeros.to_vec(), poles.to_vec(), params[params.len() - 1].exp())
}

#[derive(Debug, Clone, Copy, Default)]
pub struct OptimizeOptions {
    pub cost: CostOptions,
    pub nelder_mead: NelderMeadOptions,
}

#[derive(Debug, Clone)]
pub struct OptimizationResult {
    pub zpk: Zpk,
    pub phi_lo_opt: f64,
    pub normalized_i: f64,
    pub cost: CostBreakdown,
    /// Fresh Nyquist run on the returned ZPK at twice the search contour range.
    pub report: NyquistReport,
    /// The returned ZPK passes every check, including the doubled contour.
    /// When no visited point does, the search optimum is returned with `false`.
    pub stable: bool,
    pub iterations: usize,
    pub evaluations: usize,
    /// Simplex converged, and its optimum is the stable point returned.
    pub converged: bool,
    pub trace: Vec<(usize, f64)>,
    pub initial_cost: CostBreakdown,
}

impl OptimizationResult {
    pub fn normalized_i_db(&self) -> f64 {
        10.0 * self.normalized_i.log10()
    }
}

/// Minimise [`cost`] over zeros, poles and gain, starting from a stable seed.
pub fn optimize_filter(config: &InterferometerConfig, initial: &Zpk, opts: &OptimizeOptions) -> Result<OptimizationResult> {
    let rates = derive_rates(config)?;
    let initial_cost = cost(&rates, initial, &opts.cost)?;
    if initial_cost.penalised() {
        let mut why = Vec::new();
        if initial_cost.n_ug > 0 {
            why.push(format!("{} filter pole(s) with Re p > -M_UG", initial_cost.n_ug));
        }
        if initial_cost.n_ucl > 0 {
            why.push(format!("Nyquist winding number {}", initial_cost.n_ucl));
        }
        if initial_cost.rho_penalty > 0.0 {
            why.push(format!("rho_min = {:.3e} below M_rho", initial_cost.rho_min));
        }
        return Err(Error::InfeasibleSeed(why.join("; ")));
    }

    let n_zeros = initial.zeros.len();
    let x0 = pack(initial);
    let nm = nelder_mead(
        |x| match cost_at(&rates, x, n_zeros, &opts.cost) {
            Ok(c) => c.total,
            Err(_) => f64::INFINITY,
        },
        &x0,
        &opts.nelder_mead,
    );
    // The search only sees the default contour; walk back along the
    // improvement trace until a point also passes the doubled-range check.
    let recheck = opts.cost.nyquist.doubled(&rates);
    let mut chosen = None;
    for (idx, x) in nm.trace_points.iter().enumerate().rev() {
        let zpk = unpack(x, n_zeros)?;
        let c = match cost(&rates, &zpk, &opts.cost) {
            Ok(c) if !c.penalised() => c,
            _ => continue,
        };
        let report = nyquist(&rates, &GainModel::Rational(zpk.clone()), &recheck)?;
        if report.n == 0 && report.z == 0 && report.rho_min >= opts.cost.margin_rho {
            chosen = Some((idx, zpk, c, report));
            break;
        }
    }
    let last = nm.trace_points.len() - 1;
    let (zpk, final_cost, report, stable, at_search_optimum) = match chosen {
        Some((idx, zpk, c, report)) => (zpk, c, report, true, idx == last),
        None => {
            let zpk = unpack(&nm.x, n_zeros)?;
            let c = cost(&rates, &zpk, &opts.cost)?;
            let report = nyquist(&rates, &GainModel::Rational(zpk.clone()), &recheck)?;
            (zpk, c, report, false, true)
        }
    };
    Ok(OptimizationResult {
        phi_lo_opt: final_cost.phi_lo,
        normalized_i: -final_cost.neg_normalized_i,
        cost: final_cost,
        report,
        stable,
        iterations: nm.iterations,
        evaluations: nm.evaluations,
        converged: nm.converged && stable && at_search_optimum,
        trace: nm.trace,
        initial_cost,
        zpk,
    })
}

/// Options echoed into the result document.
#[derive(Debug, Clone, Serialize)]
pub struct OptionsEcho {
    pub weight: f64,
    pub margin_ug: f64,
    pub margin_rho: f64,
    pub band_rad_s: (f64, f64),
    pub contour_omega_max: f64,
    pub quad_rel_tol: f64,
    pub delay: &'static str,
    pub nelder_mead: NelderMeadOptions,
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimizationDocument {
    pub seed: String,
    pub initial_zpk: ZpkFile,
    pub zpk: ZpkFile,
    pub phi_lo_rad: f64,
    pub normalized_i: f64,
    pub normalized_i_db: f64,
    pub initial_normalized_i: f64,
    pub verdict: Verdict,
    pub stable: bool,
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
    pub trace: Vec<(usize, f64)>,
    pub options: OptionsEcho,
}

impl OptimizationDocument {
    pub fn new(seed: &str, initial: &Zpk, result: &OptimizationResult, rates: &DerivedRates, opts: &OptimizeOptions) -> Self {
        let c = &opts.cost;
        Self {
            seed: seed.to_string(),
            initial_zpk: ZpkFile::from_zpk(initial, RootUnit::Hz),
            zpk: ZpkFile::from_zpk(&result.zpk, RootUnit::Hz),
            phi_lo_rad: result.phi_lo_opt,
            normalized_i: result.normalized_i,
            normalized_i_db: result.normalized_i_db(),
            initial_normalized_i: -result.initial_cost.neg_normalized_i,
            verdict: result.report.verdict(),
            stable: result.stable,
            converged: result.converged,
            iterations: result.iterations,
            evaluations: result.evaluations,
            trace: result.trace.clone(),
            options: OptionsEcho {
                weight: c.weight,
                margin_ug: c.margin_ug,
                margin_rho: c.margin_rho,
                band_rad_s: c.band.unwrap_or_else(|| half_fsr_band(rates)),
                contour_omega_max: c.nyquist.range(rates),
                quad_rel_tol: c.quad.rel_tol,
                delay: match c.mode {
                    DelayMode::Exact => "exact",
                    DelayMode::SecondOrder => "second-order",
                },
                nelder_mead: opts.nelder_mead,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::table_three_pole_lossless;

    fn rates() -> DerivedRates {
        derive_rates(&InterferometerConfig::reference()).unwrap()
    }

    #[test]
    fn pack_round_trip() {
        let z = table_three_pole_lossless();
        let back = unpack(&pack(&z), 3).unwrap();
        for (a, b) in z.poles.iter().zip(&back.poles) {
            assert_eq!(a, b);
        }
        assert!((back.k - z.k).abs() < 1e-15);
        assert!(unpack(&[1.0, 2.0], 1).is_err());
    }

    #[test]
    fn unstable_pole_dominates() {
        let r = rates();
        let z = Zpk::new(vec![Complex64::new(-5.0, 0.0)], vec![Complex64::new(1.0, 0.0)], 1.0).unwrap();
        let c = cost(&r, &z, &CostOptions::default()).unwrap();
        assert!(c.n_ug >= 1);
        assert!(c.total >= 1e8 - 200.0);
    }

    #[test]
    fn unity_equivalent_zpk_is_passive() {
        let r = rates();
        let roots = vec![Complex64::new(-30.0, 5.0)];
        let z = Zpk::new(roots.clone(), roots, 1.0).unwrap();
        let c = cost(&r, &z, &CostOptions::default()).unwrap();
        assert!(!c.penalised());
        assert!((c.total + 1.0).abs() < 0.1, "{}", c.total);
    }

    #[test]
    fn infeasible_seed_is_rejected() {
        let z = Zpk::new(vec![Complex64::new(-5.0, 0.0)], vec![Complex64::new(1.0, 0.0)], 1.0).unwrap();
        let err = optimize_filter(&InterferometerConfig::reference(), &z, &OptimizeOptions::default()).unwrap_err();
        match err {
            Error::InfeasibleSeed(msg) => assert!(msg.contains("M_UG")),
            other => panic!("unexpected {other}"),
        }
    }
}
