//! Optimized filter configurations and scenario presets.
//!
//! Roots are tabulated in Hz (`s / 2 pi`) and converted on construction.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::Result;
use crate::gains::pt_to_zpk;
use crate::model::{derive_rates, pt_condition_coupling, GainModel, InterferometerConfig, Zpk};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn zpk_hz(zeros: &[Complex64], poles: &[Complex64], k: f64) -> Zpk {
    Zpk::from_hz(zeros, poles, k).expect("tabulated ZPK is well formed")
}

/// Filter-cavity and sensing-cavity round-trip losses of the lossy rows.
pub const TABLE_LAMBDA_F: f64 = 2e-3;
pub const TABLE_LAMBDA_S: f64 = 5e-5;
/// Readout loss used for the loss study.
pub const TABLE_LAMBDA_O: f64 = 0.3;

/// Mechanical frequency and quality factor of the PT-symmetric row.
pub const PT_F_M: f64 = 5e5;
pub const PT_Q_M: f64 = 1e10;

pub fn table_two_pole_lossless() -> Zpk {
    zpk_hz(
        &[c(14.82, 1.775e5), c(-14.79, 5.16e-3)],
        &[c(-1.0e-2, -3.61e-4), c(-0.739, 1.813e5)],
        1.019389,
    )
}

pub fn table_three_pole_lossless() -> Zpk {
    zpk_hz(
        &[c(-21.33, 0.0), c(-6.91, 12.78), c(-6.91, -12.78)],
        &[c(-8.56, -7.48e-4), c(-2.62, 1.131e-4), c(-9.33, 9.90e-4)],
        0.998930,
    )
}

pub fn table_two_pole_lossy() -> Zpk {
    zpk_hz(
        &[c(10.84, 9.98e5), c(-14.78, -3.49e-4)],
        &[c(-1.0e-2, -2.76e-5), c(-0.1936, 1.003e6)],
        1.003015,
    )
}

pub fn table_three_pole_lossy() -> Zpk {
    zpk_hz(
        &[c(-21.09, 0.0), c(-7.18, 12.30), c(-7.18, -12.30)],
        &[c(-7.26, 8.30e-4), c(-2.20, 1.666e-4), c(-11.37, 1.038e-3)],
        0.999188,
    )
}

/// PT-symmetric filter at the PT condition for `config`.
pub fn pt_reference(config: &InterferometerConfig) -> GainModel {
    let rates = derive_rates(config).expect("valid configuration");
    GainModel::PtSymmetric { f_m: PT_F_M, q_m: PT_Q_M, g: pt_condition_coupling(&rates) }
}

/// Rational PT-symmetric seed for the optimizer.
///
/// The reference quality factor puts the mechanical poles at `-1.6e-4` rad/s,
/// inside the open-loop margin `M_UG`, so the seed lowers `Q_m` until the
/// poles sit at `-2 M_UG`. The enhancement is unchanged at that resolution.
pub fn pt_seed(config: &InterferometerConfig, margin_ug: f64) -> Result<Zpk> {
    let rates = derive_rates(config)?;
    let omega_m = 2.0 * PI * PT_F_M;
    let q = PT_Q_M.min(omega_m / (4.0 * margin_ug));
    pt_to_zpk(PT_F_M, q, pt_condition_coupling(&rates), rates.tau_f)
}

/// One named curve of a preset.
#[derive(Debug, Clone)]
pub struct PresetCurve {
    pub label: String,
    pub config: InterferometerConfig,
    pub gain: GainModel,
}

fn curve(label: &str, config: &InterferometerConfig, gain: GainModel) -> PresetCurve {
    PresetCurve { label: label.to_string(), config: *config, gain }
}

pub const PRESET_NAMES: [&str; 6] = ["fig2", "fig3", "fig4", "fig5", "fig7", "table1"];

/// Curves for a named scenario built on `base` (normally the reference config).
pub fn preset(name: &str, base: &InterferometerConfig) -> Option<Vec<PresetCurve>> {
    let lossless = (*base).lossless();
    let out = match name {
        "fig2" => {
            let mut v: Vec<PresetCurve> = (0..5)
                .map(|k| {
                    let phi = k as f64 * PI / 8.0;
                    curve(&format!("detuned_{k}pi8"), &lossless, GainModel::Detuned { phi })
                })
                .collect();
            v.push(curve("optimal", &lossless, GainModel::Optimal));
            v
        }
        "fig3" => vec![
            curve("passive", &lossless, GainModel::Unity),
            curve("optimal", &lossless, GainModel::Optimal),
            curve("pt_symmetric", &lossless, pt_reference(&lossless)),
            curve("two_pole", &lossless, GainModel::Rational(table_two_pole_lossless())),
            curve("three_pole", &lossless, GainModel::Rational(table_three_pole_lossless())),
        ],
        "fig4" => {
            let readout = lossless.with_losses(TABLE_LAMBDA_O, 0.0, 0.0);
            let full = lossless.with_losses(TABLE_LAMBDA_O, TABLE_LAMBDA_F, TABLE_LAMBDA_S);
            vec![
                curve("three_pole_lossless", &lossless, GainModel::Rational(table_three_pole_lossless())),
                curve("three_pole_readout_loss", &readout, GainModel::Rational(table_three_pole_lossless())),
                curve("three_pole_full_loss", &full, GainModel::Rational(table_three_pole_lossy())),
                curve("passive_full_loss", &full, GainModel::Unity),
            ]
        }
        "fig5" => vec![
            curve("narrowband", &lossless, GainModel::Detuned { phi: PI / 2.0 }),
            curve("broadband", &lossless, GainModel::Unity),
            curve("optimal", &lossless, GainModel::Optimal),
        ],
        "fig7" => {
            let rates = derive_rates(&lossless).ok()?;
            let g = pt_condition_coupling(&rates);
            [1e3, 1e4, 1e5, 1e10]
                .iter()
                .map(|&q| curve(&format!("pt_q{:.0e}", q), &lossless, GainModel::PtSymmetric { f_m: PT_F_M, q_m: q, g }))
                .collect()
        }
        "table1" => {
            let lossy = lossless.with_losses(base.lambda_o, TABLE_LAMBDA_F, TABLE_LAMBDA_S);
            vec![
                curve("pt_symmetric", &lossless, pt_reference(&lossless)),
                curve("two_pole_lossless", &lossless, GainModel::Rational(table_two_pole_lossless())),
                curve("three_pole_lossless", &lossless, GainModel::Rational(table_three_pole_lossless())),
                curve("two_pole_lossy", &lossy, GainModel::Rational(table_two_pole_lossy())),
                curve("three_pole_lossy", &lossy, GainModel::Rational(table_three_pole_lossy())),
            ]
        }
        _ => return None,
    };
    Some(out)
}
