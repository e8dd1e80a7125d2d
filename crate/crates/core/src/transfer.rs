//! Cavity propagators and the signal/noise transfer functions to the readout port.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gains::gain_at;
use crate::model::{DerivedRates, GainModel};

/// How the cavity delays `exp(-s tau)` are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DelayMode {
    #[default]
    Exact,
    /// Quadratic Taylor expansion `1 - s tau + (s tau)^2 / 2`.
    SecondOrder,
}

/// Round-trip-lossy propagator `exp(-s tau) sqrt(1 - loss)`.
pub fn propagator(tau: f64, s: Complex64, mode: DelayMode, loss: f64) -> Complex64 {
    let x = s * tau;
    let z = match mode {
        DelayMode::Exact => (-x).exp(),
        DelayMode::SecondOrder => Complex64::new(1.0, 0.0) - x + x * x / 2.0,
    };
    z * (1.0 - loss).sqrt()
}

/// Transfer functions from the signal and every noise input to the output field,
/// evaluated at one complex frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferSet {
    pub t_xi: Complex64,
    pub t_nq: Complex64,
    pub t_na1: Complex64,
    pub t_na2: Complex64,
    pub t_nlo: Complex64,
    pub t_nlf: Complex64,
    pub t_nls: Complex64,
    /// Shared denominator `-1 + r_CM Zs^2 + G^2 r_IM Zf^2 (r_CM - Zs^2)`.
    pub denominator: Complex64,
}

impl TransferSet {
    /// Sum of `|T|^2` over every noise channel at this frequency.
    pub fn noise_power(&self) -> f64 {
        self.t_nq.norm_sqr()
            + self.t_na1.norm_sqr()
            + self.t_na2.norm_sqr()
            + self.t_nlo.norm_sqr()
            + self.t_nlf.norm_sqr()
            + self.t_nls.norm_sqr()
    }
}

/// Evaluate all transfer functions for gain `model` at `s`, including losses
/// carried in `rates`.
pub fn transfer_set(rates: &DerivedRates, model: &GainModel, s: Complex64, mode: DelayMode) -> Result<TransferSet> {
    let g = gain_at(model, s, rates)?;
    transfer_set_with_gain(rates, g, s, mode)
}

/// Same as [`transfer_set`] but with a precomputed gain value `G(s)`.
pub fn transfer_set_with_gain(rates: &DerivedRates, g: Complex64, s: Complex64, mode: DelayMode) -> Result<TransferSet> {
    let zf = propagator(rates.tau_f, s, mode, rates.lambda_f);
    let zs_bare = propagator(rates.tau_s, s, mode, 0.0);
    let zs = zs_bare * (1.0 - rates.lambda_s).sqrt();
    let zs2 = zs * zs;
    let zf2 = zf * zf;
    let g2 = g * g;
    let eta = rates.eta;
    let (t_im, r_im, t_cm, r_cm) = (rates.t_im, rates.r_im, rates.t_cm, rates.r_cm);

    let sens_rt = r_cm * zs2 - 1.0;
    let sens_refl = r_cm - zs2;
    let den = sens_rt + g2 * r_im * zf2 * sens_refl;
    if den == Complex64::new(0.0, 0.0) || !den.re.is_finite() || !den.im.is_finite() {
        return Err(Error::Singular { what: "cavity resonance", s });
    }
    let inv = 1.0 / den;
    // Added-noise coupling magnitude |sqrt(1 - G0^2)|; its phase is fixed to zero.
    let k = (1.0 - g.norm_sqr()).abs().sqrt();

    Ok(TransferSet {
        t_xi: -eta * g * t_cm * t_im * zf * zs * inv,
        t_nq: eta * (g2 * zf2 * sens_refl + r_im * sens_rt) * inv,
        t_na1: eta * g * k * t_im * zf2 * sens_refl * inv,
        t_na2: eta * (1.0 - rates.lambda_f).sqrt() * k * t_im * sens_rt * inv,
        t_nlo: Complex64::new(rates.lambda_o.sqrt(), 0.0),
        t_nlf: eta * rates.lambda_f.sqrt() * t_im * sens_rt * inv,
        t_nls: -eta * g * t_cm * t_im * zf * zs_bare * rates.lambda_s.sqrt() * inv,
        denominator: den,
    })
}

/// Transfer functions of the loss-free system, written out independently of
/// the lossy expressions. Loss fields of `rates` are ignored.
pub fn lossless_transfer_set(rates: &DerivedRates, g: Complex64, s: Complex64, mode: DelayMode) -> Result<TransferSet> {
    let zf = propagator(rates.tau_f, s, mode, 0.0);
    let zs = propagator(rates.tau_s, s, mode, 0.0);
    let g0 = g.norm();
    let e_phi = if g0 > 0.0 { g / g0 } else { Complex64::new(1.0, 0.0) };
    let (t_im, r_im, t_cm, r_cm) = (rates.t_im, rates.r_im, rates.t_cm, rates.r_cm);
    let den = -1.0 + r_cm * zs * zs + g0 * g0 * e_phi * e_phi * r_im * zf * zf * (r_cm - zs * zs);
    if den == Complex64::new(0.0, 0.0) {
        return Err(Error::Singular { what: "cavity resonance", s });
    }
    let k = (1.0 - g0 * g0).abs().sqrt();
    let zero = Complex64::new(0.0, 0.0);
    Ok(TransferSet {
        t_xi: -(g0 * e_phi * t_cm * t_im * zf * zs) / den,
        t_nq: (g0 * g0 * e_phi * e_phi * zf * zf * (r_cm - zs * zs) + r_im * (-1.0 + r_cm * zs * zs)) / den,
        t_na1: (e_phi * g0 * k * t_im * zf * zf * (r_cm - zs * zs)) / den,
        t_na2: (k * t_im * (-1.0 + r_cm * zs * zs)) / den,
        t_nlo: zero,
        t_nlf: zero,
        t_nls: zero,
        denominator: den,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{derive_rates, InterferometerConfig};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn propagator_basics() {
        assert_eq!(propagator(1e-5, c(0.0, 0.0), DelayMode::Exact, 0.0), c(1.0, 0.0));
        let tau = 2e-3;
        let half = propagator(tau, c(0.0, PI / tau), DelayMode::Exact, 0.0);
        assert_relative_eq!(half.re, -1.0, epsilon = 1e-12);
        assert!(half.im.abs() < 1e-12);
        let lossy = propagator(tau, c(0.0, 0.0), DelayMode::Exact, 0.19);
        assert_relative_eq!(lossy.re, 0.9, epsilon = 1e-15);
    }

    #[test]
    fn second_order_delay_is_close_at_low_frequency() {
        let tau = 1.33426e-5;
        let s = c(0.0, 1e3);
        let a = propagator(tau, s, DelayMode::Exact, 0.0);
        let b = propagator(tau, s, DelayMode::SecondOrder, 0.0);
        assert!((a - b).norm() / a.norm() < 1e-6);
        // |s| tau < 0.03 keeps the relative error below 1e-4
        let s = c(0.0, 0.03 / tau);
        let a = propagator(tau, s, DelayMode::Exact, 0.0);
        let b = propagator(tau, s, DelayMode::SecondOrder, 0.0);
        assert!((a - b).norm() / a.norm() < 1e-4);
    }

    #[test]
    fn output_loss_channel_is_flat() {
        let cfg = InterferometerConfig::reference().with_losses(0.3, 0.0, 0.0);
        let r = derive_rates(&cfg).unwrap();
        for w in [0.0, 10.0, 1e4] {
            let ts = transfer_set(&r, &GainModel::Unity, c(0.0, w), DelayMode::Exact).unwrap();
            assert_relative_eq!(ts.t_nlo.re, 0.3f64.sqrt(), epsilon = 1e-15);
        }
    }

    #[test]
    fn unit_gain_couples_no_added_noise() {
        let r = derive_rates(&InterferometerConfig::reference()).unwrap();
        for w in [0.0, 1.0, 93.0, 5e4] {
            let ts = transfer_set(&r, &GainModel::Unity, c(0.0, w), DelayMode::Exact).unwrap();
            assert_eq!(ts.t_na1, c(0.0, 0.0));
            assert_eq!(ts.t_na2, c(0.0, 0.0));
        }
    }

    #[test]
    fn passive_lossless_noise_is_all_pass() {
        let r = derive_rates(&InterferometerConfig::reference()).unwrap();
        for i in 0..200 {
            let w = -2e5 + 2e3 * i as f64 + 0.37;
            for phi in [0.0, 0.4, PI / 2.0] {
                let ts = transfer_set(&r, &GainModel::Detuned { phi }, c(0.0, w), DelayMode::Exact).unwrap();
                assert_relative_eq!(ts.t_nq.norm(), 1.0, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn resonance_reports_offending_frequency() {
        // A lossless single-mirror-free configuration: t_cm = 0 makes r_cm = 1,
        // and the sensing loop is exactly on resonance at DC.
        let mut cfg = InterferometerConfig::reference();
        cfg.t_cm = 0.0;
        cfg.t_im = 0.0;
        let r = derive_rates(&cfg).unwrap();
        let err = transfer_set(&r, &GainModel::Unity, c(0.0, 0.0), DelayMode::Exact).unwrap_err();
        assert!(matches!(err, Error::Singular { .. }));
    }
}
