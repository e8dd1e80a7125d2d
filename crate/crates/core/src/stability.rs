//! Open-loop gain, Nyquist-contour mapping and closed-loop verdicts.

use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::gains::{gain_squared, pt_to_zpk};
use crate::model::{DerivedRates, GainModel, Zpk};
use crate::transfer::{propagator, DelayMode};

/// `T_OL = r_IM G^2 Zf^2 r_s` with the sensing-cavity reflectance
/// `r_s = (Zs^2 - r_CM) / (1 - r_CM Zs^2)`.
///
/// The closed-loop denominator of every transfer function is proportional to
/// `1 + T_OL`.
pub fn open_loop(rates: &DerivedRates, model: &GainModel, s: Complex64, mode: DelayMode) -> Result<Complex64> {
    let g2 = gain_squared(model, s, rates)?;
    open_loop_with_gain_sq(rates, g2, s, mode)
}

pub fn open_loop_with_gain_sq(rates: &DerivedRates, g2: Complex64, s: Complex64, mode: DelayMode) -> Result<Complex64> {
    let zf = propagator(rates.tau_f, s, mode, rates.lambda_f);
    let zs = propagator(rates.tau_s, s, mode, rates.lambda_s);
    let zs2 = zs * zs;
    let den = 1.0 - rates.r_cm * zs2;
    if den.norm() == 0.0 {
        return Err(Error::Singular { what: "sensing-cavity resonance", s });
    }
    let r_s = (zs2 - rates.r_cm) / den;
    Ok(rates.r_im * g2 * zf * zf * r_s)
}

/// Rational form of a gain law, if it has one.
pub fn rational_form(model: &GainModel, rates: &DerivedRates) -> Result<Option<Zpk>> {
    match model {
        GainModel::Rational(z) => Ok(Some(z.clone())),
        GainModel::PtSymmetric { f_m, q_m, g } => pt_to_zpk(*f_m, *q_m, *g, rates.tau_f).map(Some),
        _ => Ok(None),
    }
}

/// Poles of a ZPK with `Re p > -margin`, each counted once.
pub fn zpk_poles_above(zpk: &Zpk, margin: f64) -> usize {
    zpk.poles.iter().filter(|p| p.re > -margin).count()
}

/// Open-loop poles of `G^2` with `Re p > -margin`.
///
/// Rational gains count every pole twice (squaring doubles multiplicity).
/// For the optimal gain `G^2 = (s + gamma_s) / (s - gamma_s)` has one simple
/// pole, so it contributes 1. The sensing reflectance has no right-half-plane
/// poles: they satisfy `exp(-2 Re(s) tau_s) = 1 / r_CM > 1`.
pub fn count_unstable_open_poles(model: &GainModel, rates: &DerivedRates, margin: f64) -> Result<usize> {
    match model {
        GainModel::Unity | GainModel::Detuned { .. } => Ok(0),
        GainModel::Optimal => Ok(usize::from(rates.gamma_s > -margin)),
        other => {
            let zpk = rational_form(other, rates)?.ok_or(Error::NotRational("gain law"))?;
            Ok(2 * zpk_poles_above(&zpk, margin))
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct NyquistOptions {
    /// Half-range of the imaginary-axis segment, rad/s. `None` selects
    /// `10 pi / tau_s`.
    pub omega_max: Option<f64>,
    /// Refinement target for consecutive phase steps of `1 + T_OL`, degrees.
    pub max_step_deg: f64,
    /// Maximum number of bisections of any initial interval.
    pub max_depth: u32,
    /// Uniform samples per sensing-cavity free spectral range in the initial grid.
    pub samples_per_fsr: usize,
    pub mode: DelayMode,
}

impl Default for NyquistOptions {
    fn default() -> Self {
        Self { omega_max: None, max_step_deg: 10.0, max_depth: 24, samples_per_fsr: 64, mode: DelayMode::Exact }
    }
}

impl NyquistOptions {
    /// Ten sensing-cavity free spectral ranges unless set explicitly. This
    /// keeps the mechanical idler resonance of optomechanical filters (near
    /// twice the mechanical frequency) outside the contour.
    pub fn range(&self, rates: &DerivedRates) -> f64 {
        self.omega_max.unwrap_or(10.0 * PI / rates.tau_s)
    }

    /// Same options with the contour range doubled.
    pub fn doubled(&self, rates: &DerivedRates) -> Self {
        Self { omega_max: Some(2.0 * self.range(rates)), ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContourSample {
    pub omega: f64,
    pub value: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NyquistReport {
    /// Net clockwise encirclements of `-1`.
    pub n: i64,
    /// Open-loop right-half-plane poles.
    pub p: i64,
    /// Closed-loop right-half-plane poles, `N + P`.
    pub z: i64,
    /// Minimum distance from the mapped contour to `-1`.
    pub rho_min: f64,
    /// Imaginary-axis samples in ascending `omega`.
    pub contour: Vec<ContourSample>,
    pub omega_max: f64,
}

impl NyquistReport {
    pub fn stable(&self) -> bool {
        self.z == 0
    }

    pub fn verdict(&self) -> Verdict {
        Verdict { n: self.n, p: self.p, z: self.z, rho_min: self.rho_min, stable: self.stable() }
    }
}

/// Compact verdict for JSON output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Verdict {
    #[serde(rename = "N")]
    pub n: i64,
    #[serde(rename = "P")]
    pub p: i64,
    #[serde(rename = "Z")]
    pub z: i64,
    pub rho_min: f64,
    pub stable: bool,
}

/// One smooth piece of the contour, parameterised on `t in [0, 1]`.
#[derive(Debug, Clone, Copy)]
enum Piece {
    /// `s = i omega`, omega from `a` to `b`.
    Axis { a: f64, b: f64 },
    /// `s = center + r exp(i theta)`, theta from `from` to `to`.
    Arc { center: Complex64, r: f64, from: f64, to: f64 },
}

impl Piece {
    fn at(&self, t: f64) -> Complex64 {
        match *self {
            Piece::Axis { a, b } => Complex64::new(0.0, a + (b - a) * t),
            Piece::Arc { center, r, from, to } => center + Complex64::from_polar(r, from + (to - from) * t),
        }
    }
}

struct Walker<'a, F: FnMut(Complex64) -> Result<Complex64>> {
    f: &'a mut F,
    max_step: f64,
    max_depth: u32,
    phase: f64,
    rho_min: f64,
    samples: Vec<(Complex64, Complex64)>,
}

impl<F: FnMut(Complex64) -> Result<Complex64>> Walker<'_, F> {
    fn eval(&mut self, s: Complex64) -> Result<Complex64> {
        let v = (self.f)(s)?;
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::Singular { what: "open-loop gain", s });
        }
        Ok(v)
    }

    /// Walk one piece over the initial parameter grid `ts`, refining each step.
    fn walk(&mut self, piece: Piece, ts: &[f64]) -> Result<()> {
        let mut t0 = ts[0];
        let mut v0 = self.eval(piece.at(t0))?;
        self.record(piece.at(t0), v0);
        for &t1 in &ts[1..] {
            let v1 = self.eval(piece.at(t1))?;
            self.refine(piece, t0, v0, t1, v1, 0)?;
            t0 = t1;
            v0 = v1;
        }
        Ok(())
    }

    fn refine(&mut self, piece: Piece, t0: f64, v0: Complex64, t1: f64, v1: Complex64, depth: u32) -> Result<()> {
        let step = step_angle(v0, v1);
        if step.abs() > self.max_step && depth < self.max_depth {
            let tm = 0.5 * (t0 + t1);
            if tm > t0 && tm < t1 {
                let vm = self.eval(piece.at(tm))?;
                self.refine(piece, t0, v0, tm, vm, depth + 1)?;
                return self.refine(piece, tm, vm, t1, v1, depth + 1);
            }
        }
        if step.abs() > 0.5 * PI {
            return Err(Error::Indeterminate { omega: piece.at(t1).im, step_deg: step.to_degrees() });
        }
        self.phase += step;
        self.record(piece.at(t1), v1);
        Ok(())
    }

    fn record(&mut self, s: Complex64, v: Complex64) {
        self.rho_min = self.rho_min.min((1.0 + v).norm());
        self.samples.push((s, v));
    }
}

/// Phase increment of `1 + T` between consecutive samples, on the principal branch.
fn step_angle(v0: Complex64, v1: Complex64) -> f64 {
    ((1.0 + v1) / (1.0 + v0)).arg()
}

/// Frequencies on the imaginary axis where the open loop has fine structure.
fn axis_features(model: &GainModel, rates: &DerivedRates) -> Result<Vec<(f64, f64)>> {
    let mut out = vec![(0.0, rates.gamma_s), (rates.gamma_s, rates.gamma_s), (-rates.gamma_s, rates.gamma_s)];
    if let Some(zpk) = rational_form(model, rates)? {
        for r in zpk.poles.iter().chain(&zpk.zeros) {
            out.push((r.im, r.re.abs()));
        }
    }
    Ok(out)
}

/// Map the Nyquist D-contour (imaginary axis over `[-Omega, Omega]`, closed by
/// a right-half-plane arc of radius `Omega`) through `T_OL` and count
/// encirclements of `-1`.
///
/// Poles of `G` within `1e-6 gamma_s` of the axis are bypassed on the right by
/// small semicircles.
pub fn nyquist(rates: &DerivedRates, model: &GainModel, opts: &NyquistOptions) -> Result<NyquistReport> {
    let omega_max = opts.range(rates);
    if !(omega_max > 0.0 && omega_max.is_finite()) {
        return Err(Error::InvalidArgument(format!("contour range must be positive, got {omega_max}")));
    }
    let p = count_unstable_open_poles(model, rates, 0.0)? as i64;
    let indent = 1e-6 * rates.gamma_s;
    let on_axis: Vec<f64> = match rational_form(model, rates)? {
        Some(z) => {
            let mut v: Vec<f64> = z.poles.iter().filter(|q| q.re.abs() <= indent).map(|q| q.im).collect();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        }
        None => Vec::new(),
    };

    // initial axis grid: uniform per FSR plus clusters around every feature
    let fsr = PI / rates.tau_s;
    let n_uniform = ((2.0 * omega_max / fsr) * opts.samples_per_fsr as f64).ceil().max(16.0) as usize;
    let mut grid: Vec<f64> = (0..=n_uniform).map(|i| -omega_max + 2.0 * omega_max * i as f64 / n_uniform as f64).collect();
    for (center, width) in axis_features(model, rates)? {
        let width = width.max(indent);
        for k in [0.0, 0.1, 0.3, 1.0, 3.0, 10.0, 30.0, 100.0, 1e3, 1e4] {
            grid.push(center + k * width);
            grid.push(center - k * width);
        }
    }
    grid.retain(|w| w.abs() <= omega_max && on_axis.iter().all(|c| (w - c).abs() > indent));
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let mut f = |s: Complex64| open_loop(rates, model, s, opts.mode);
    let mut walker = Walker {
        f: &mut f,
        max_step: opts.max_step_deg.to_radians(),
        max_depth: opts.max_depth,
        phase: 0.0,
        rho_min: f64::INFINITY,
        samples: Vec::new(),
    };

    // split the axis at indentations
    let mut bounds = vec![-omega_max];
    for &c in &on_axis {
        bounds.push(c - indent);
        bounds.push(c + indent);
    }
    bounds.push(omega_max);
    for (k, seg) in bounds.chunks(2).enumerate() {
        let (a, b) = (seg[0], seg[1]);
        let mut pts: Vec<f64> = vec![a];
        pts.extend(grid.iter().copied().filter(|&w| w > a && w < b));
        pts.push(b);
        let ts: Vec<f64> = pts.iter().map(|w| (w - a) / (b - a)).collect();
        walker.walk(Piece::Axis { a, b }, &ts)?;
        if let Some(&c) = on_axis.get(k) {
            let semi = Piece::Arc { center: Complex64::new(0.0, c), r: indent, from: -0.5 * PI, to: 0.5 * PI };
            walker.walk(semi, &uniform(32))?;
        }
    }
    let axis_samples: Vec<ContourSample> = walker
        .samples
        .iter()
        .filter(|(s, _)| s.re == 0.0)
        .map(|(s, v)| ContourSample { omega: s.im, value: *v })
        .collect();
    let big = Piece::Arc { center: Complex64::new(0.0, 0.0), r: omega_max, from: 0.5 * PI, to: -0.5 * PI };
    walker.walk(big, &uniform(512))?;

    let turns = -walker.phase / (2.0 * PI);
    let n = turns.round();
    if (turns - n).abs() > 1e-6 {
        return Err(Error::Indeterminate { omega: omega_max, step_deg: (turns - n) * 360.0 });
    }
    let n = n as i64;
    Ok(NyquistReport { n, p, z: n + p, rho_min: walker.rho_min, contour: axis_samples, omega_max })
}

fn uniform(n: usize) -> Vec<f64> {
    (0..=n).map(|i| i as f64 / n as f64).collect()
}

/// Contour CSV with columns `omega_rad_s,re,im`.
pub fn contour_csv(report: &NyquistReport) -> String {
    let mut out = String::from("omega_rad_s,re,im\n");
    for c in &report.contour {
        out.push_str(&format!("{:e},{:e},{:e}\n", c.omega, c.value.re, c.value.im));
    }
    out
}
