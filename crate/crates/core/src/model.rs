//! Interferometer configuration, derived cavity rates and the filter-gain
//! data model shared by the rest of the crate.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Geometry and loss budget of the coupled-cavity interferometer.
///
/// All quantities are SI. Transmissions and losses are power fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterferometerConfig {
    /// Sensing-cavity length, m.
    pub l_s: f64,
    /// Filter-cavity length, m.
    pub l_f: f64,
    /// Input mirror power transmission.
    pub t_im: f64,
    /// Central mirror power transmission.
    pub t_cm: f64,
    /// End mirror power transmission.
    #[serde(default)]
    pub t_em: f64,
    /// Carrier wavelength, m. Only used for pump-power conversion.
    #[serde(default = "default_wavelength")]
    pub lambda: f64,
    /// Output loss.
    #[serde(default)]
    pub lambda_o: f64,
    /// Filter-cavity round-trip loss.
    #[serde(default)]
    pub lambda_f: f64,
    /// Sensing-cavity round-trip loss.
    #[serde(default)]
    pub lambda_s: f64,
}

fn default_wavelength() -> f64 {
    1.064e-6
}

impl Default for InterferometerConfig {
    fn default() -> Self {
        Self::reference()
    }
}

impl InterferometerConfig {
    /// The 4 km / 40 m reference scenario with no losses.
    pub fn reference() -> Self {
        Self {
            l_s: 4000.0,
            l_f: 40.0,
            t_im: 0.02,
            t_cm: 0.005,
            t_em: 0.0,
            lambda: default_wavelength(),
            lambda_o: 0.0,
            lambda_f: 0.0,
            lambda_s: 0.0,
        }
    }

    /// Reference scenario with the given output, filter and sensing losses.
    pub fn with_losses(mut self, lambda_o: f64, lambda_f: f64, lambda_s: f64) -> Self {
        self.lambda_o = lambda_o;
        self.lambda_f = lambda_f;
        self.lambda_s = lambda_s;
        self
    }

    pub fn lossless(self) -> Self {
        self.with_losses(0.0, 0.0, 0.0)
    }

    pub fn has_losses(&self) -> bool {
        self.lambda_o > 0.0 || self.lambda_f > 0.0 || self.lambda_s > 0.0
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [("l_s", self.l_s), ("l_f", self.l_f), ("lambda", self.lambda)];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        let unit = [("t_im", self.t_im), ("t_cm", self.t_cm), ("t_em", self.t_em)];
        for (name, v) in unit {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidConfig(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        let losses = [
            ("lambda_o", self.lambda_o),
            ("lambda_f", self.lambda_f),
            ("lambda_s", self.lambda_s),
        ];
        for (name, v) in losses {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::InvalidConfig(format!("{name} must lie in [0, 1), got {v}")));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Rates and amplitude coefficients derived from an [`InterferometerConfig`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedRates {
    /// One-way sensing-cavity propagation time, s.
    pub tau_s: f64,
    /// One-way filter-cavity propagation time, s.
    pub tau_f: f64,
    pub t_im: f64,
    pub r_im: f64,
    pub t_cm: f64,
    pub r_cm: f64,
    pub r_em: f64,
    /// Sensing-cavity bandwidth, rad/s.
    pub gamma_s: f64,
    /// Filter-cavity bandwidth, rad/s.
    pub gamma_f: f64,
    /// Optical coupling rate between the two cavities, rad/s.
    pub omega_s: f64,
    /// Output efficiency amplitude, sqrt(1 - lambda_o).
    pub eta: f64,
    /// Power losses carried along so that transfer functions only need the rates.
    pub lambda_o: f64,
    pub lambda_f: f64,
    pub lambda_s: f64,
}

impl DerivedRates {
    /// Passive-system integral bound `pi / tau_s`, rad/s.
    pub fn i0(&self) -> f64 {
        PI / self.tau_s
    }

    /// Sensing-cavity free spectral range `pi / tau_s`, rad/s.
    pub fn fsr(&self) -> f64 {
        PI / self.tau_s
    }
}

pub fn derive_rates(config: &InterferometerConfig) -> Result<DerivedRates> {
    config.validate()?;
    let tau_s = config.l_s / SPEED_OF_LIGHT;
    let tau_f = config.l_f / SPEED_OF_LIGHT;
    let t_im = config.t_im.sqrt();
    let t_cm = config.t_cm.sqrt();
    let gamma_s = config.t_cm / (4.0 * tau_s);
    let gamma_f = config.t_im / (4.0 * tau_f);
    Ok(DerivedRates {
        tau_s,
        tau_f,
        t_im,
        r_im: (1.0 - config.t_im).sqrt(),
        t_cm,
        r_cm: (1.0 - config.t_cm).sqrt(),
        r_em: (1.0 - config.t_em).sqrt(),
        gamma_s,
        gamma_f,
        omega_s: t_cm / (2.0 * (tau_f * tau_s).sqrt()),
        eta: (1.0 - config.lambda_o).sqrt(),
        lambda_o: config.lambda_o,
        lambda_f: config.lambda_f,
        lambda_s: config.lambda_s,
    })
}

/// Optomechanical coupling rate produced by circulating pump power `p_f`.
///
/// `g = sqrt(16 pi P_f / (m lambda omega_m L_f))`. Zero pump gives zero coupling.
pub fn pump_power_to_coupling(p_f: f64, mass: f64, lambda: f64, omega_m: f64, l_f: f64) -> Result<f64> {
    if !(p_f >= 0.0 && p_f.is_finite()) {
        return Err(Error::InvalidArgument(format!("pump power must be non-negative, got {p_f}")));
    }
    for (name, v) in [("mass", mass), ("lambda", lambda), ("omega_m", omega_m), ("l_f", l_f)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
        }
    }
    Ok((16.0 * PI * p_f / (mass * lambda * omega_m * l_f)).sqrt())
}

/// Coupling rate at which the optomechanical gain tracks the optimal phase,
/// `g^2 = t_CM^2 / (8 tau_f tau_s)`, i.e. `g = omega_s / sqrt(2)`.
pub fn pt_condition_coupling(rates: &DerivedRates) -> f64 {
    (rates.t_cm * rates.t_cm / (8.0 * rates.tau_f * rates.tau_s)).sqrt()
}

/// Rational gain `K prod(s - z_i) / prod(s - p_j)` with roots in rad/s.
///
/// Roots are not required to come in conjugate pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Zpk {
    pub zeros: Vec<Complex64>,
    pub poles: Vec<Complex64>,
    pub k: f64,
}

impl Zpk {
    pub fn new(zeros: Vec<Complex64>, poles: Vec<Complex64>, k: f64) -> Result<Self> {
        let zpk = Self { zeros, poles, k };
        zpk.validate()?;
        Ok(zpk)
    }

    pub fn validate(&self) -> Result<()> {
        if self.zeros.len() != self.poles.len() {
            return Err(Error::InvalidArgument(format!(
                "ZPK needs as many zeros as poles ({} zeros, {} poles)",
                self.zeros.len(),
                self.poles.len()
            )));
        }
        if !(self.k.is_finite() && self.k >= 0.0) {
            return Err(Error::InvalidArgument(format!("ZPK gain must be real and non-negative, got {}", self.k)));
        }
        if self.zeros.iter().chain(&self.poles).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidArgument("ZPK roots must be finite".into()));
        }
        Ok(())
    }

    /// Build from roots given in Hz (`s / 2 pi`), as printed in tables.
    pub fn from_hz(zeros_hz: &[Complex64], poles_hz: &[Complex64], k: f64) -> Result<Self> {
        let scale = 2.0 * PI;
        Self::new(
            zeros_hz.iter().map(|z| z * scale).collect(),
            poles_hz.iter().map(|p| p * scale).collect(),
            k,
        )
    }

    pub fn zeros_hz(&self) -> Vec<Complex64> {
        self.zeros.iter().map(|z| z / (2.0 * PI)).collect()
    }

    pub fn poles_hz(&self) -> Vec<Complex64> {
        self.poles.iter().map(|p| p / (2.0 * PI)).collect()
    }

    pub fn order(&self) -> usize {
        self.poles.len()
    }
}

/// Filter-gain law placed inside the filter cavity.
#[derive(Debug, Clone, PartialEq)]
pub enum GainModel {
    /// Passive filter cavity tuned to resonance.
    Unity,
    /// Passive filter cavity with a one-way detuning phase, rad.
    Detuned { phi: f64 },
    /// The all-pass gain `sqrt((s + gamma_s)/(s - gamma_s))`.
    Optimal,
    /// Pumped mechanical oscillator in the filter cavity.
    PtSymmetric {
        /// Mechanical frequency, Hz.
        f_m: f64,
        /// Mechanical quality factor.
        q_m: f64,
        /// Optomechanical coupling rate, rad/s.
        g: f64,
    },
    Rational(Zpk),
}

impl GainModel {
    pub fn name(&self) -> &'static str {
        match self {
            GainModel::Unity => "unity",
            GainModel::Detuned { .. } => "detuned",
            GainModel::Optimal => "optimal",
            GainModel::PtSymmetric { .. } => "pt",
            GainModel::Rational(_) => "zpk",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            GainModel::PtSymmetric { f_m, q_m, g } => {
                if !(*f_m > 0.0 && *q_m > 0.0 && *g >= 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "PT gain requires f_m > 0, Q_m > 0, g >= 0 (got f_m={f_m}, Q_m={q_m}, g={g})"
                    )));
                }
                Ok(())
            }
            GainModel::Rational(zpk) => zpk.validate(),
            GainModel::Detuned { phi } if !phi.is_finite() => {
                Err(Error::InvalidArgument("detuning phase must be finite".into()))
            }
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn reference_rates() {
        let r = derive_rates(&InterferometerConfig::reference()).unwrap();
        assert_relative_eq!(r.gamma_s, 93.685143125, max_relative = 1e-10);
        assert!((r.gamma_s / (2.0 * PI) - 14.91).abs() < 0.01);
        assert_relative_eq!(r.tau_s, 1.33426e-5, max_relative = 1e-5);
        assert_eq!(r.r_em, 1.0);
    }

    #[test]
    fn mirror_amplitudes_are_lossless() {
        let r = derive_rates(&InterferometerConfig::reference()).unwrap();
        assert_relative_eq!(r.t_im * r.t_im + r.r_im * r.r_im, 1.0, epsilon = 1e-15);
        assert_relative_eq!(r.t_cm * r.t_cm + r.r_cm * r.r_cm, 1.0, epsilon = 1e-15);
        assert_relative_eq!(r.gamma_s * r.tau_s, r.t_cm * r.t_cm / 4.0, max_relative = 1e-14);
        assert_relative_eq!(r.gamma_f * r.tau_f, r.t_im * r.t_im / 4.0, max_relative = 1e-14);
    }

    #[test]
    fn rejects_bad_geometry() {
        let mut cfg = InterferometerConfig::reference();
        cfg.l_s = 0.0;
        assert!(derive_rates(&cfg).is_err());
        let mut cfg = InterferometerConfig::reference();
        cfg.t_cm = 1.5;
        assert!(derive_rates(&cfg).is_err());
        let mut cfg = InterferometerConfig::reference();
        cfg.lambda_o = 1.0;
        assert!(derive_rates(&cfg).is_err());
    }

    #[test]
    fn pump_power_square_root_law() {
        let w_m = 2.0 * PI * 5e5;
        assert_eq!(pump_power_to_coupling(0.0, 1.0, 1.064e-6, w_m, 40.0).unwrap(), 0.0);
        let g1 = pump_power_to_coupling(1.0, 1.0, 1.064e-6, w_m, 40.0).unwrap();
        let g4 = pump_power_to_coupling(4.0, 1.0, 1.064e-6, w_m, 40.0).unwrap();
        assert_relative_eq!(g4, 2.0 * g1, max_relative = 1e-14);
        // independent path: 16 pi / (lambda omega_m L_f) computed stepwise
        let denom: f64 = 1.064e-6 * 3_141_592.653589793 * 40.0;
        let expected = (50.26548245743669 / denom).sqrt();
        assert_relative_eq!(g1, expected, max_relative = 1e-12);
        assert!(pump_power_to_coupling(1.0, 0.0, 1.064e-6, w_m, 40.0).is_err());
        assert!(pump_power_to_coupling(-1.0, 1.0, 1.064e-6, w_m, 40.0).is_err());
    }

    #[test]
    fn pt_coupling_reference() {
        let r = derive_rates(&InterferometerConfig::reference()).unwrap();
        let g = pt_condition_coupling(&r);
        assert!((g - 1.8738e4).abs() / 1.8738e4 < 1e-4);
        assert_relative_eq!(4.0 * g * g * r.tau_f, 2.0 * r.gamma_s, max_relative = 1e-12);
        assert_relative_eq!(g, r.omega_s / 2f64.sqrt(), max_relative = 1e-12);

        let mut cfg = InterferometerConfig::reference();
        cfg.l_s *= 2.0;
        let g2 = pt_condition_coupling(&derive_rates(&cfg).unwrap());
        assert_relative_eq!(g2 * g2, g * g / 2.0, max_relative = 1e-12);
    }

    #[test]
    fn config_json_defaults_losses() {
        let cfg = InterferometerConfig::from_json(r#"{"l_s":4000,"l_f":40,"t_im":0.02,"t_cm":0.005}"#).unwrap();
        assert_eq!(cfg, InterferometerConfig::reference());
        assert!(InterferometerConfig::from_json(r#"{"l_s":-1,"l_f":40,"t_im":0.02,"t_cm":0.005}"#).is_err());
    }

    #[test]
    fn zpk_requires_matching_orders() {
        let z = vec![Complex64::new(-1.0, 0.0)];
        assert!(Zpk::new(z.clone(), vec![], 1.0).is_err());
        assert!(Zpk::new(z.clone(), z.clone(), -1.0).is_err());
        assert!(Zpk::new(z.clone(), z, 1.0).is_ok());
    }
}
