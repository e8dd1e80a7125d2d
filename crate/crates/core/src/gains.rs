//! Evaluation of the filter-gain laws and their rational (ZPK) forms.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::{DerivedRates, GainModel, Zpk};

/// Phase of the optomechanical coupling term in the PT-symmetric gain.
///
/// The gain is `1 - i * 4 g^2 tau_f omega_m / ((s + gamma_m)(s + gamma_m - 2 i omega_m))`.
/// With this pump phase the gain approaches `1 + gamma_s / s` between the
/// mechanical linewidth and `omega_m`, matching the optimal all-pass gain.
pub const PT_COUPLING_PHASE: Complex64 = Complex64::new(0.0, 1.0);

/// Complex gain value together with its polar decomposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainValue {
    pub value: Complex64,
    /// Magnitude `G_0 >= 0`.
    pub magnitude: f64,
    /// Phase `phi_G`, rad.
    pub phase: f64,
}

impl GainValue {
    pub fn new(value: Complex64) -> Self {
        Self { value, magnitude: value.norm(), phase: value.arg() }
    }
}

fn singular(what: &'static str, s: Complex64) -> Error {
    Error::Singular { what, s }
}

fn finite(v: Complex64) -> bool {
    v.re.is_finite() && v.im.is_finite()
}

/// Evaluate `G(s)` for any gain law.
pub fn eval_gain(model: &GainModel, s: Complex64, rates: &DerivedRates) -> Result<GainValue> {
    gain_at(model, s, rates).map(GainValue::new)
}

/// Raw complex gain, without the polar decomposition.
pub fn gain_at(model: &GainModel, s: Complex64, rates: &DerivedRates) -> Result<Complex64> {
    match model {
        GainModel::Unity => Ok(Complex64::new(1.0, 0.0)),
        GainModel::Detuned { phi } => Ok(Complex64::from_polar(1.0, *phi)),
        GainModel::Optimal => optimal_ratio(s, rates.gamma_s).map(|r| r.sqrt()),
        GainModel::PtSymmetric { f_m, q_m, g } => pt_gain(s, *f_m, *q_m, *g, rates.tau_f),
        GainModel::Rational(zpk) => zpk_eval(zpk, s),
    }
}

/// `G(s)^2`. For the optimal gain this is the rational Mobius ratio and carries
/// no branch cut, which is what the open-loop gain needs.
pub fn gain_squared(model: &GainModel, s: Complex64, rates: &DerivedRates) -> Result<Complex64> {
    match model {
        GainModel::Optimal => optimal_ratio(s, rates.gamma_s),
        other => gain_at(other, s, rates).map(|g| g * g),
    }
}

fn optimal_ratio(s: Complex64, gamma_s: f64) -> Result<Complex64> {
    let num = s + gamma_s;
    let den = s - gamma_s;
    if num == Complex64::new(0.0, 0.0) || den == Complex64::new(0.0, 0.0) {
        return Err(singular("optimal gain branch point", s));
    }
    Ok(num / den)
}

fn pt_gain(s: Complex64, f_m: f64, q_m: f64, g: f64, tau_f: f64) -> Result<Complex64> {
    let omega_m = 2.0 * PI * f_m;
    let gamma_m = omega_m / (2.0 * q_m);
    let den = (s + gamma_m) * (s + gamma_m - Complex64::new(0.0, 2.0 * omega_m));
    let v = Complex64::new(1.0, 0.0) - PT_COUPLING_PHASE * (4.0 * g * g * tau_f * omega_m) / den;
    if !finite(v) {
        return Err(singular("PT gain pole", s));
    }
    Ok(v)
}

/// `K prod(s - z_i) / prod(s - p_j)`, evaluated as a product of ratios.
pub fn zpk_eval(zpk: &Zpk, s: Complex64) -> Result<Complex64> {
    let mut acc = Complex64::new(zpk.k, 0.0);
    for (z, p) in zpk.zeros.iter().zip(&zpk.poles) {
        let d = s - p;
        if d == Complex64::new(0.0, 0.0) {
            return Err(singular("ZPK pole", s));
        }
        acc *= (s - z) / d;
    }
    if !finite(acc) {
        return Err(singular("ZPK pole", s));
    }
    Ok(acc)
}

/// Rational form of the PT-symmetric gain.
///
/// Poles are `-gamma_m` and `-gamma_m + 2 i omega_m`; zeros solve
/// `(s + gamma_m)(s + gamma_m - 2 i omega_m) = c * 4 g^2 tau_f omega_m`
/// with `c` the coupling phase. `K = 1`.
pub fn pt_to_zpk(f_m: f64, q_m: f64, g: f64, tau_f: f64) -> Result<Zpk> {
    if !(f_m > 0.0 && q_m > 0.0 && g >= 0.0 && tau_f > 0.0) {
        return Err(Error::InvalidArgument("PT parameters must be positive".into()));
    }
    let omega_m = 2.0 * PI * f_m;
    let gamma_m = omega_m / (2.0 * q_m);
    let coupling = PT_COUPLING_PHASE * (4.0 * g * g * tau_f * omega_m);
    // u = s + gamma_m solves u^2 + b u + c0 = 0
    let b = Complex64::new(0.0, -2.0 * omega_m);
    let c0 = -coupling;
    let (u1, u2) = quadratic_roots(b, c0);
    let poles = vec![
        Complex64::new(-gamma_m, 0.0),
        Complex64::new(-gamma_m, 2.0 * omega_m),
    ];
    let zeros = vec![u1 - gamma_m, u2 - gamma_m];
    Zpk::new(zeros, poles, 1.0)
}

/// Roots of the monic quadratic `u^2 + b u + c`, avoiding cancellation.
fn quadratic_roots(b: Complex64, c: Complex64) -> (Complex64, Complex64) {
    let mut d = (b * b - 4.0 * c).sqrt();
    if (b.conj() * d).re < 0.0 {
        d = -d;
    }
    let q = -(b + d) / 2.0;
    if q == Complex64::new(0.0, 0.0) {
        return (q, q);
    }
    (q, c / q)
}

/// Unit convention of the roots in a ZPK file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RootUnit {
    Hz,
    RadS,
}

/// On-disk ZPK document: roots as `[re, im]` pairs plus a real gain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZpkFile {
    pub unit: RootUnit,
    pub zeros: Vec<[f64; 2]>,
    pub poles: Vec<[f64; 2]>,
    pub k: f64,
}

impl ZpkFile {
    /// Serialize `zpk` with roots expressed in `unit`.
    pub fn from_zpk(zpk: &Zpk, unit: RootUnit) -> Self {
        let scale = match unit {
            RootUnit::Hz => 1.0 / (2.0 * PI),
            RootUnit::RadS => 1.0,
        };
        let pairs = |v: &[Complex64]| v.iter().map(|c| [c.re * scale, c.im * scale]).collect();
        Self { unit, zeros: pairs(&zpk.zeros), poles: pairs(&zpk.poles), k: zpk.k }
    }

    pub fn to_zpk(&self) -> Result<Zpk> {
        let scale = match self.unit {
            RootUnit::Hz => 2.0 * PI,
            RootUnit::RadS => 1.0,
        };
        let roots = |v: &[[f64; 2]]| v.iter().map(|p| Complex64::new(p[0], p[1]) * scale).collect();
        Zpk::new(roots(&self.zeros), roots(&self.poles), self.k)
    }
}

pub fn zpk_to_json(zpk: &Zpk) -> Result<String> {
    Ok(serde_json::to_string_pretty(&ZpkFile::from_zpk(zpk, RootUnit::Hz))?)
}

pub fn zpk_from_json(text: &str) -> Result<Zpk> {
    let file: ZpkFile = serde_json::from_str(text)?;
    file.to_zpk()
}
