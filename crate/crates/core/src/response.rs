//! SNR enhancement `chi^2(omega)`, homodyne-angle optimisation, band
//! integration and the closed-form approximations used to sanity check them.

use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

use crate::error::{Error, Result};
use crate::gains::gain_at;
use crate::model::{DerivedRates, GainModel};
use crate::quadrature::{integrate_log, QuadOptions};
use crate::transfer::{transfer_set_with_gain, DelayMode, TransferSet};

/// One point of an enhancement curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiPoint {
    pub omega: f64,
    pub chi_sq: f64,
    /// Homodyne angle used, rad.
    pub phi_lo: f64,
}

/// Homodyne readout convention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Homodyne {
    /// A single fixed angle for every frequency.
    Fixed(f64),
    /// A single angle for the whole band, chosen to maximise the integral.
    GlobalOptimal,
    /// The best angle at each frequency separately.
    PerFrequency,
}

/// Upper (`s = i omega`) and lower (`s = -i omega`) sideband transfer sets.
#[derive(Debug, Clone, Copy)]
pub struct Sidebands {
    pub upper: TransferSet,
    pub lower: TransferSet,
}

impl Sidebands {
    pub fn evaluate(rates: &DerivedRates, model: &GainModel, omega: f64, mode: DelayMode) -> Result<Self> {
        let sp = Complex64::new(0.0, omega);
        let sm = Complex64::new(0.0, -omega);
        let gp = gain_at(model, sp, rates)?;
        let gm = gain_at(model, sm, rates)?;
        Ok(Self {
            upper: transfer_set_with_gain(rates, gp, sp, mode)?,
            lower: transfer_set_with_gain(rates, gm, sm, mode)?,
        })
    }

    /// Phase and amplitude signal quadratures `(T1, i T2)`.
    pub fn quadratures(&self) -> (Complex64, Complex64) {
        signal_quadratures(self.upper.t_xi, self.lower.t_xi)
    }

    pub fn noise(&self) -> f64 {
        noise_psd_ratio(&self.upper, &self.lower)
    }

    /// Entries `(|A|^2, |B|^2, Re(A conj B))` of the homodyne quadratic form.
    pub fn quadratic_form(&self) -> [f64; 3] {
        let (a, b) = self.quadratures();
        [a.norm_sqr(), b.norm_sqr(), (a * b.conj()).re]
    }
}

/// `A = T(i w) + T*(-i w)` and `B = i (T(i w) - T*(-i w))`.
pub fn signal_quadratures(t_upper: Complex64, t_lower: Complex64) -> (Complex64, Complex64) {
    let a = t_upper + t_lower.conj();
    let b = Complex64::i() * (t_upper - t_lower.conj());
    (a, b)
}

/// Homodyne signal power `|T1 sin(phi) + i T2 cos(phi)|^2` from the two
/// sideband values of `T_xi`.
pub fn signal_psd_ratio(t_upper: Complex64, t_lower: Complex64, phi_lo: f64) -> f64 {
    let (a, b) = signal_quadratures(t_upper, t_lower);
    (a * phi_lo.sin() + b * phi_lo.cos()).norm_sqr()
}

/// Total noise power summed over every channel and both sidebands.
pub fn noise_psd_ratio(upper: &TransferSet, lower: &TransferSet) -> f64 {
    upper.noise_power() + lower.noise_power()
}

/// Largest eigenvalue of `[[a, c], [c, b]]` and the angle `phi` whose vector
/// `(sin phi, cos phi)` attains it, folded into `[0, pi)`.
pub fn max_quadratic_form(a: f64, b: f64, c: f64) -> (f64, f64) {
    let mean = 0.5 * (a + b);
    let rad = (0.25 * (a - b) * (a - b) + c * c).sqrt();
    let lambda = mean + rad;
    let (x, y) = if c == 0.0 {
        if a >= b { (1.0, 0.0) } else { (0.0, 1.0) }
    } else if a >= b {
        (lambda - b, c)
    } else {
        (c, lambda - a)
    };
    let mut phi = x.atan2(y);
    if phi < 0.0 {
        phi += PI;
    }
    if phi >= PI {
        phi -= PI;
    }
    (lambda, phi)
}

pub fn chi_sq(rates: &DerivedRates, model: &GainModel, omega: f64, phi_lo: f64, mode: DelayMode) -> Result<ChiPoint> {
    check_omega(omega)?;
    let sb = Sidebands::evaluate(rates, model, omega, mode)?;
    let signal = signal_psd_ratio(sb.upper.t_xi, sb.lower.t_xi, phi_lo);
    Ok(ChiPoint { omega, chi_sq: signal / sb.noise(), phi_lo })
}

/// Best homodyne angle at a single frequency, and the resulting `chi^2`.
pub fn optimal_homodyne_at(rates: &DerivedRates, model: &GainModel, omega: f64, mode: DelayMode) -> Result<ChiPoint> {
    check_omega(omega)?;
    let sb = Sidebands::evaluate(rates, model, omega, mode)?;
    let [a, b, c] = sb.quadratic_form();
    let (lambda, phi) = max_quadratic_form(a, b, c);
    Ok(ChiPoint { omega, chi_sq: lambda / sb.noise(), phi_lo: phi })
}

/// `chi^2` under a given homodyne convention. `GlobalOptimal` has no meaning
/// pointwise and falls back to the per-frequency optimum.
pub fn chi_point(rates: &DerivedRates, model: &GainModel, omega: f64, homodyne: Homodyne, mode: DelayMode) -> Result<ChiPoint> {
    match homodyne {
        Homodyne::Fixed(phi) => chi_sq(rates, model, omega, phi, mode),
        _ => optimal_homodyne_at(rates, model, omega, mode),
    }
}

fn check_omega(omega: f64) -> Result<()> {
    if !(omega >= 0.0 && omega.is_finite()) {
        return Err(Error::InvalidArgument(format!("omega must be finite and >= 0, got {omega}")));
    }
    Ok(())
}

/// Band-integrated enhancement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnhancementIntegral {
    /// `int chi^2 d omega`, rad/s.
    pub value: f64,
    /// `value / I0` with `I0 = pi / tau_s`.
    pub normalized: f64,
    pub band: (f64, f64),
    /// The angle used when the convention has a single angle.
    pub phi_lo: Option<f64>,
    pub evaluations: usize,
}

impl EnhancementIntegral {
    pub fn normalized_db(&self) -> f64 {
        10.0 * self.normalized.log10()
    }
}

/// Integration band `[0, pi / (2 tau_s)]` used by the cost function.
pub fn half_fsr_band(rates: &DerivedRates) -> (f64, f64) {
    (0.0, PI / (2.0 * rates.tau_s))
}

/// Frequencies around which the integrand has structure, used to seed the
/// quadrature partition.
pub fn feature_frequencies(rates: &DerivedRates, model: &GainModel) -> Vec<f64> {
    let lim = ClosedFormLimits::new(rates);
    let mut out = vec![lim.omega_nb, lim.omega_bb, rates.gamma_s, rates.gamma_f, rates.omega_s];
    let mut roots = |r: Complex64| {
        let center = r.im.abs();
        let width = r.re.abs();
        out.push(center);
        for k in [0.5, 1.0, 3.0, 10.0, 30.0] {
            out.push(center + k * width);
            if center > k * width {
                out.push(center - k * width);
            }
        }
        if width > 0.0 {
            out.push(width);
        }
    };
    match model {
        GainModel::Rational(zpk) => {
            for r in zpk.poles.iter().chain(&zpk.zeros) {
                roots(*r);
            }
        }
        GainModel::PtSymmetric { f_m, q_m, g } => {
            if let Ok(zpk) = crate::gains::pt_to_zpk(*f_m, *q_m, *g, rates.tau_f) {
                for r in zpk.poles.iter().chain(&zpk.zeros) {
                    roots(*r);
                }
            }
        }
        _ => {}
    }
    out.retain(|w| w.is_finite() && *w > 0.0);
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// Integrate `chi^2` over `band` (rad/s) with relative tolerance `1e-4`.
///
/// The DC plateau below `1e-3 omega_nb` is added as a flat segment.
pub fn integral_enhancement(
    rates: &DerivedRates,
    model: &GainModel,
    homodyne: Homodyne,
    band: (f64, f64),
    mode: DelayMode,
) -> Result<EnhancementIntegral> {
    integral_enhancement_with(rates, model, homodyne, band, mode, QuadOptions::default())
}

pub fn integral_enhancement_with(
    rates: &DerivedRates,
    model: &GainModel,
    homodyne: Homodyne,
    band: (f64, f64),
    mode: DelayMode,
    opts: QuadOptions,
) -> Result<EnhancementIntegral> {
    let (lo, hi) = band;
    let fsr = PI / rates.tau_s;
    if !(lo >= 0.0 && hi > lo && hi <= fsr * (1.0 + 1e-12)) {
        return Err(Error::InvalidArgument(format!(
            "integration band [{lo}, {hi}] must lie within [0, pi/tau_s = {fsr}]"
        )));
    }
    let integrand = |w: f64| -> Result<[f64; 4]> {
        let sb = Sidebands::evaluate(rates, model, w, mode)?;
        let noise = sb.noise();
        let [a, b, c] = sb.quadratic_form();
        let (lambda, _) = max_quadratic_form(a, b, c);
        Ok([a / noise, b / noise, c / noise, lambda / noise])
    };
    let floor = 1e-3 * ClosedFormLimits::new(rates).omega_nb;
    let start = if lo > 0.0 { lo } else { floor.min(hi * 1e-3) };
    let scale = match homodyne {
        Homodyne::PerFrequency => |v: &[f64; 4]| v[3],
        _ => |v: &[f64; 4]| v[0] + v[1],
    };
    let breaks = feature_frequencies(rates, model);
    let res = integrate_log(integrand, start, hi, &breaks, 10, scale, opts)?;
    let mut total = res.value;
    if lo == 0.0 {
        let dc = integrand(start)?;
        for k in 0..4 {
            total[k] += dc[k] * start;
        }
    }
    let [a, b, c, lam] = total;
    let (value, phi_lo) = match homodyne {
        Homodyne::PerFrequency => (lam, None),
        Homodyne::GlobalOptimal => {
            let (v, phi) = max_quadratic_form(a, b, c);
            (v, Some(phi))
        }
        Homodyne::Fixed(phi) => {
            let (s, co) = phi.sin_cos();
            (s * s * a + co * co * b + 2.0 * s * co * c, Some(phi))
        }
    };
    Ok(EnhancementIntegral {
        value,
        normalized: value / rates.i0(),
        band,
        phi_lo,
        evaluations: res.evaluations + 1,
    })
}

/// Closed-form corner frequencies, DC levels and integral limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedFormLimits {
    pub gamma_s: f64,
    pub gamma_f: f64,
    pub omega_nb: f64,
    pub omega_bb: f64,
    pub x_nb: f64,
    pub x_bb: f64,
    pub i0: f64,
    pub i_opt_over_i0: f64,
    pub i_pt_over_i0: f64,
}

impl ClosedFormLimits {
    pub fn new(rates: &DerivedRates) -> Self {
        let t_im2 = rates.t_im * rates.t_im;
        Self {
            gamma_s: rates.gamma_s,
            gamma_f: rates.gamma_f,
            omega_nb: rates.gamma_s * t_im2 / 4.0,
            omega_bb: 4.0 * rates.gamma_s / t_im2,
            x_nb: 4.0 * SQRT_2 / (rates.t_im * rates.t_cm),
            x_bb: SQRT_2 * rates.t_im / rates.t_cm,
            i0: rates.i0(),
            i_opt_over_i0: 4.0 / t_im2,
            i_pt_over_i0: 1.0 / rates.t_im,
        }
    }
}

/// Which closed-form approximation of `chi(omega)` to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApproxKind {
    /// Passive narrowband (tuned signal recycling).
    Nb,
    /// Passive broadband, single-pole form.
    Bb,
    /// Passive broadband including coupled-cavity corrections.
    Bb2,
    /// Optimal gain, single-pole form.
    Opt,
    /// Optimal gain including the filter-cavity roll-off.
    Opt2,
    /// PT-symmetric filter in the infinite-Q limit.
    PtInfQ,
}

/// Closed-form approximation of `chi` (amplitude, not squared).
pub fn chi_approx(kind: ApproxKind, rates: &DerivedRates, omega: f64) -> f64 {
    let lim = ClosedFormLimits::new(rates);
    let w2 = omega * omega;
    match kind {
        ApproxKind::Nb => lim.x_nb / (1.0 + w2 / (lim.omega_nb * lim.omega_nb)).sqrt(),
        ApproxKind::Bb => lim.x_bb / (1.0 + w2 / (lim.omega_bb * lim.omega_bb)).sqrt(),
        ApproxKind::Bb2 => {
            let gf = rates.gamma_f;
            let inner = 1.0 + (w2 - 2.0 * lim.omega_bb * gf) / (gf * gf);
            lim.x_bb / (1.0 + w2 / (lim.omega_bb * lim.omega_bb) * inner).sqrt()
        }
        ApproxKind::Opt => lim.x_nb / (1.0 + w2 / (rates.gamma_s * rates.gamma_s)).sqrt(),
        ApproxKind::Opt2 => {
            let gs2 = rates.gamma_s * rates.gamma_s;
            let gf2 = rates.gamma_f * rates.gamma_f;
            lim.x_nb / (1.0 + w2 / gs2 * (1.0 + w2 / gf2)).sqrt()
        }
        ApproxKind::PtInfQ => {
            let (tc, ti, ts, tf) = (rates.t_cm, rates.t_im, rates.tau_s, rates.tau_f);
            let num = 8.0 * SQRT_2 * tc * ti * ts * omega;
            let den = tc.powi(8)
                + 48.0 * tc.powi(4) * ti * ti * ts * ts * w2
                + 64.0 * ts.powi(4) * w2 * w2 * (ti.powi(4) + 16.0 * tf * tf * w2);
            num / den.sqrt()
        }
    }
}

/// Relative enhancement for a gain of magnitude `1 + epsilon` at the optimal phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiRel {
    pub value: f64,
    /// False when `|epsilon| > 0.5`, where the small-deviation expansion is unreliable.
    pub within_validity: bool,
}

pub fn chi_rel(epsilon: f64, t_im: f64) -> ChiRel {
    let t2 = t_im * t_im;
    let t4 = t2 * t2;
    let e2 = 16.0 * epsilon * epsilon;
    let cross = epsilon * (epsilon + 2.0) * t2;
    let den = if epsilon < 0.0 { t4 + e2 - 4.0 * cross } else { t4 + e2 + 12.0 * cross };
    ChiRel { value: t2 / den.sqrt(), within_validity: epsilon.abs() <= 0.5 }
}

/// High- and low-frequency upper bounds on `chi` for PT-symmetric filters.
pub fn pt_bounds(rates: &DerivedRates, omega: f64) -> (f64, f64) {
    let wt = omega * rates.tau_s;
    let hf = SQRT_2 * rates.t_cm / rates.t_im / wt;
    let lf = 8.0 * rates.t_im / rates.t_cm.powi(3) * wt;
    (hf, lf)
}

/// Frequency at which the two PT bounds coincide.
pub fn pt_bounds_crossing(rates: &DerivedRates) -> f64 {
    // sqrt2 tc / (ti x) = 8 ti x / tc^3 with x = omega tau_s
    let x2 = SQRT_2 * rates.t_cm.powi(4) / (8.0 * rates.t_im * rates.t_im);
    x2.sqrt() / rates.tau_s
}

/// `10 log10` of a power ratio.
pub fn db(power_ratio: f64) -> f64 {
    10.0 * power_ratio.log10()
}

pub fn default_phi_for(model: &GainModel) -> f64 {
    match model {
        GainModel::Detuned { .. } => 0.0,
        _ => FRAC_PI_2,
    }
}
