//! Command-line front end: sweeps, closed-form limits, Nyquist verdicts,
//! band integrals and filter optimization, written as CSV/JSON files.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gains::zpk_from_json;
use crate::model::{derive_rates, pt_condition_coupling, DerivedRates, GainModel, InterferometerConfig, Zpk};
use crate::nelder_mead::NelderMeadOptions;
use crate::optimize::{optimize_filter, CostOptions, OptimizationDocument, OptimizeOptions};
use crate::presets::{self, PresetCurve, PRESET_NAMES, PT_F_M, PT_Q_M};
use crate::ratfit::{default_seed_band, seed_from_gopt, FitReport};
use crate::response::{chi_point, half_fsr_band, integral_enhancement, ClosedFormLimits, Homodyne};
use crate::stability::{contour_csv, nyquist, NyquistOptions};
use crate::transfer::DelayMode;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_SINGULAR: i32 = 3;
pub const EXIT_INFEASIBLE: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "pifilter", version, about = "Interferometer response and active filter synthesis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-frequency SNR enhancement curves, one CSV per gain.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        gains: GainArgs,
    },
    /// Closed-form corner frequencies and integral limits.
    Limits {
        #[command(flatten)]
        common: Common,
    },
    /// Nyquist contour and closed-loop verdict.
    Nyquist {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        gains: GainArgs,
        /// Multiply the default contour range (ten free spectral ranges).
        #[arg(long, default_value_t = 1.0)]
        range_factor: f64,
    },
    /// Band-integrated enhancement for each gain.
    Integral {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        gains: GainArgs,
    },
    /// Stability-constrained search for a rational filter.
    Optimize {
        #[command(flatten)]
        common: Common,
        /// `pt`, `vectfit:N`, `table:NAME` or `zpk:PATH`.
        #[arg(long, default_value = "pt")]
        seed: String,
        /// Expected number of filter poles; must match the seed.
        #[arg(long)]
        poles: Option<usize>,
        #[arg(long, default_value_t = 5000)]
        max_iter: usize,
    },
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Interferometer configuration JSON; the reference scenario when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Frequency band `LO:HI` in Hz.
    #[arg(long)]
    pub band: Option<String>,
    /// Number of log-spaced sweep points.
    #[arg(long, default_value_t = 600)]
    pub grid: usize,
    #[arg(long, value_enum, default_value_t = Delay::Exact)]
    pub delay: Delay,
    #[arg(long, value_enum, default_value_t = HomodyneArg::PerFrequency)]
    pub homodyne: HomodyneArg,
    #[arg(long, value_enum, default_value_t = Switch::On)]
    pub losses: Switch,
}

#[derive(Debug, Clone, Args)]
pub struct GainArgs {
    /// Named scenario: fig2, fig3, fig4, fig5, fig7, table1.
    #[arg(long)]
    pub preset: Option<String>,
    /// Gain spec: unity, optimal, detuned:PHI, pt[:Q[:F_HZ]], table:NAME, zpk:PATH.
    #[arg(long = "gain")]
    pub gains: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Delay {
    Exact,
    SecondOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum HomodyneArg {
    Global,
    PerFrequency,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Switch {
    On,
    Off,
}

impl From<Delay> for DelayMode {
    fn from(d: Delay) -> Self {
        match d {
            Delay::Exact => DelayMode::Exact,
            Delay::SecondOrder => DelayMode::SecondOrder,
        }
    }
}

impl From<HomodyneArg> for Homodyne {
    fn from(h: HomodyneArg) -> Self {
        match h {
            HomodyneArg::Global => Homodyne::GlobalOptimal,
            HomodyneArg::PerFrequency => Homodyne::PerFrequency,
        }
    }
}

/// Provenance record written next to every set of outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: Option<String>,
    pub options: serde_json::Value,
    pub outputs: Vec<String>,
    pub version: String,
    pub wall_time_s: f64,
}

/// Map an error onto the process exit code.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InfeasibleSeed(_) => EXIT_INFEASIBLE,
        Error::Singular { .. }
        | Error::Quadrature { .. }
        | Error::IllPosedFit { .. }
        | Error::Indeterminate { .. }
        | Error::Cost { .. } => EXIT_SINGULAR,
        Error::InvalidConfig(_) | Error::InvalidArgument(_) | Error::NotRational(_) | Error::Io(_) | Error::Json(_) => {
            EXIT_INPUT
        }
    }
}

/// Parse `args` (including the program name), run, and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match execute(&cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn execute(command: &Command) -> Result<()> {
    let start = Instant::now();
    let (name, common, options, outputs) = match command {
        Command::Sweep { common, gains } => ("sweep", common, serde_json::json!({ "gains": gains.gains, "preset": gains.preset }), cmd_sweep(common, gains)?),
        Command::Limits { common } => ("limits", common, serde_json::json!({}), cmd_limits(common)?),
        Command::Nyquist { common, gains, range_factor } => (
            "nyquist",
            common,
            serde_json::json!({ "gains": gains.gains, "preset": gains.preset, "range_factor": range_factor }),
            cmd_nyquist(common, gains, *range_factor)?,
        ),
        Command::Integral { common, gains } => ("integral", common, serde_json::json!({ "gains": gains.gains, "preset": gains.preset }), cmd_integral(common, gains)?),
        Command::Optimize { common, seed, poles, max_iter } => (
            "optimize",
            common,
            serde_json::json!({ "seed": seed, "poles": poles, "max_iter": max_iter }),
            cmd_optimize(common, seed, *poles, *max_iter)?,
        ),
    };
    let mut opts = serde_json::json!({
        "band_hz": common.band,
        "grid": common.grid,
        "delay": common.delay,
        "homodyne": common.homodyne,
        "losses": common.losses,
    });
    if let (Some(dst), Some(src)) = (opts.as_object_mut(), options.as_object()) {
        dst.extend(src.clone());
    }
    let manifest = RunManifest {
        command: name.to_string(),
        config_path: common.config.as_ref().map(|p| p.display().to_string()),
        options: opts,
        outputs,
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    write_file(&common.out, &format!("{name}.manifest.json"), &(serde_json::to_string_pretty(&manifest)? + "\n"))?;
    Ok(())
}

fn load_config(common: &Common) -> Result<InterferometerConfig> {
    let cfg = match &common.config {
        Some(path) => InterferometerConfig::from_json(&std::fs::read_to_string(path)?)?,
        None => InterferometerConfig::reference(),
    };
    Ok(match common.losses {
        Switch::On => cfg,
        Switch::Off => cfg.lossless(),
    })
}

/// Parse `LO:HI` (Hz) into rad/s.
pub fn parse_band(text: &str) -> Result<(f64, f64)> {
    let bad = || Error::InvalidArgument(format!("band must be LO:HI in Hz, got {text:?}"));
    let (lo, hi) = text.split_once(':').ok_or_else(bad)?;
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
        return Err(bad());
    }
    Ok((2.0 * PI * lo, 2.0 * PI * hi))
}

fn table_zpk(name: &str) -> Result<Zpk> {
    Ok(match name {
        "two_pole_lossless" => presets::table_two_pole_lossless(),
        "three_pole_lossless" => presets::table_three_pole_lossless(),
        "two_pole_lossy" => presets::table_two_pole_lossy(),
        "three_pole_lossy" => presets::table_three_pole_lossy(),
        _ => {
            return Err(Error::InvalidArgument(format!(
                "unknown table entry {name:?}; expected two_pole_lossless, three_pole_lossless, two_pole_lossy or three_pole_lossy"
            )))
        }
    })
}

fn parse_number(field: &str, spec: &str) -> Result<f64> {
    field
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("bad number {field:?} in gain spec {spec:?}")))
}

/// Parse a gain spec into a label and a model.
pub fn parse_gain_spec(spec: &str, rates: &DerivedRates) -> Result<(String, GainModel)> {
    let mut parts = spec.split(':');
    let head = parts.next().unwrap_or_default();
    let rest: Vec<&str> = parts.collect();
    let arity = |n: usize| -> Result<()> {
        if rest.len() > n {
            Err(Error::InvalidArgument(format!("too many fields in gain spec {spec:?}")))
        } else {
            Ok(())
        }
    };
    let model = match head {
        "unity" | "passive" => {
            arity(0)?;
            GainModel::Unity
        }
        "optimal" => {
            arity(0)?;
            GainModel::Optimal
        }
        "detuned" => {
            arity(1)?;
            let phi = rest.first().map(|f| parse_number(f, spec)).transpose()?.unwrap_or(0.0);
            GainModel::Detuned { phi }
        }
        "pt" => {
            arity(2)?;
            let q_m = rest.first().map(|f| parse_number(f, spec)).transpose()?.unwrap_or(PT_Q_M);
            let f_m = rest.get(1).map(|f| parse_number(f, spec)).transpose()?.unwrap_or(PT_F_M);
            GainModel::PtSymmetric { f_m, q_m, g: pt_condition_coupling(rates) }
        }
        "table" => {
            arity(1)?;
            GainModel::Rational(table_zpk(rest.first().copied().unwrap_or_default())?)
        }
        "zpk" => {
            let path = spec.strip_prefix("zpk:").unwrap_or_default();
            if path.is_empty() {
                return Err(Error::InvalidArgument("zpk gain spec needs a path".into()));
            }
            GainModel::Rational(zpk_from_json(&std::fs::read_to_string(path)?)?)
        }
        _ => return Err(Error::InvalidArgument(format!("unknown gain spec {spec:?}"))),
    };
    model.validate()?;
    let label = match head {
        "zpk" => Path::new(&spec[4..]).file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "zpk".into()),
        _ => spec.to_string(),
    };
    Ok((sanitize(&label), model))
}

fn sanitize(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect()
}

/// Resolve `--preset` / `--gain` into curves; an empty selection is an input error.
fn resolve_curves(common: &Common, gains: &GainArgs) -> Result<Vec<PresetCurve>> {
    let base = load_config(common)?;
    let mut curves = Vec::new();
    if let Some(name) = &gains.preset {
        let found = presets::preset(name, &base).ok_or_else(|| {
            Error::InvalidArgument(format!("unknown preset {name:?}; expected one of {}", PRESET_NAMES.join(", ")))
        })?;
        curves.extend(found.into_iter().map(|mut c| {
            if common.losses == Switch::Off {
                c.config = c.config.lossless();
            }
            c
        }));
    }
    let rates = derive_rates(&base)?;
    for spec in &gains.gains {
        let (label, gain) = parse_gain_spec(spec, &rates)?;
        curves.push(PresetCurve { label, config: base, gain });
    }
    if curves.is_empty() {
        return Err(Error::InvalidArgument("no gains given; use --gain SPEC or --preset NAME".into()));
    }
    Ok(curves)
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<String> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, contents)?;
    Ok(path.display().to_string())
}

fn sweep_grid(common: &Common, rates: &DerivedRates) -> Result<Vec<f64>> {
    let (lo, hi) = match &common.band {
        Some(b) => parse_band(b)?,
        None => (2.0 * PI * 1e-2, 2.0 * PI / (4.0 * rates.tau_s)),
    };
    if common.grid < 2 || lo <= 0.0 {
        return Err(Error::InvalidArgument("sweep needs --grid >= 2 and a band with LO > 0".into()));
    }
    let n = common.grid;
    Ok((0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect())
}

fn integration_band(common: &Common, rates: &DerivedRates) -> Result<(f64, f64)> {
    match &common.band {
        Some(b) => parse_band(b),
        None => Ok(half_fsr_band(rates)),
    }
}

pub fn cmd_sweep(common: &Common, gains: &GainArgs) -> Result<Vec<String>> {
    let curves = resolve_curves(common, gains)?;
    let mode = DelayMode::from(common.delay);
    let mut outputs = Vec::new();
    for curve in &curves {
        let rates = derive_rates(&curve.config)?;
        let homodyne = match common.homodyne {
            HomodyneArg::PerFrequency => Homodyne::PerFrequency,
            HomodyneArg::Global => {
                let i = integral_enhancement(&rates, &curve.gain, Homodyne::GlobalOptimal, half_fsr_band(&rates), mode)?;
                Homodyne::Fixed(i.phi_lo.unwrap_or(0.0))
            }
        };
        let mut csv = String::from("frequency_hz,chi_db,phi_lo_rad\n");
        for omega in sweep_grid(common, &rates)? {
            let p = chi_point(&rates, &curve.gain, omega, homodyne, mode)?;
            let _ = writeln!(csv, "{},{},{}", omega / (2.0 * PI), 10.0 * p.chi_sq.log10(), p.phi_lo);
        }
        outputs.push(write_file(&common.out, &format!("sweep_{}.csv", curve.label), &csv)?);
    }
    Ok(outputs)
}

#[derive(Debug, Serialize)]
struct LimitsDocument {
    gamma_s_hz: f64,
    limits: ClosedFormLimits,
    rates: DerivedRates,
}

pub fn cmd_limits(common: &Common) -> Result<Vec<String>> {
    let rates = derive_rates(&load_config(common)?)?;
    let doc = LimitsDocument { gamma_s_hz: rates.gamma_s / (2.0 * PI), limits: ClosedFormLimits::new(&rates), rates };
    let text = serde_json::to_string_pretty(&doc)? + "\n";
    print!("{text}");
    Ok(vec![write_file(&common.out, "limits.json", &text)?])
}

#[derive(Debug, Serialize)]
struct NyquistDocument {
    label: String,
    gain: &'static str,
    #[serde(rename = "N")]
    n: i64,
    #[serde(rename = "P")]
    p: i64,
    #[serde(rename = "Z")]
    z: i64,
    rho_min: f64,
    stable: bool,
    omega_max: f64,
}

pub fn cmd_nyquist(common: &Common, gains: &GainArgs, range_factor: f64) -> Result<Vec<String>> {
    if !(range_factor > 0.0 && range_factor.is_finite()) {
        return Err(Error::InvalidArgument(format!("range factor must be positive, got {range_factor}")));
    }
    let curves = resolve_curves(common, gains)?;
    let mut outputs = Vec::new();
    for curve in &curves {
        let rates = derive_rates(&curve.config)?;
        let mut opts = NyquistOptions { mode: common.delay.into(), ..Default::default() };
        opts.omega_max = Some(range_factor * opts.range(&rates));
        let report = nyquist(&rates, &curve.gain, &opts)?;
        let doc = NyquistDocument {
            label: curve.label.clone(),
            gain: curve.gain.name(),
            n: report.n,
            p: report.p,
            z: report.z,
            rho_min: report.rho_min,
            stable: report.stable(),
            omega_max: report.omega_max,
        };
        println!("{}: N={} P={} Z={} rho_min={:.3e} stable={}", doc.label, doc.n, doc.p, doc.z, doc.rho_min, doc.stable);
        outputs.push(write_file(&common.out, &format!("nyquist_{}.csv", curve.label), &contour_csv(&report))?);
        outputs.push(write_file(
            &common.out,
            &format!("nyquist_{}.json", curve.label),
            &(serde_json::to_string_pretty(&doc)? + "\n"),
        )?);
    }
    Ok(outputs)
}

#[derive(Debug, Serialize)]
struct IntegralRow {
    label: String,
    gain: &'static str,
    value_rad_s: f64,
    normalized: f64,
    normalized_db: f64,
    phi_lo_rad: Option<f64>,
    band_rad_s: (f64, f64),
}

pub fn cmd_integral(common: &Common, gains: &GainArgs) -> Result<Vec<String>> {
    let curves = resolve_curves(common, gains)?;
    let mut rows = Vec::new();
    for curve in &curves {
        let rates = derive_rates(&curve.config)?;
        let band = integration_band(common, &rates)?;
        let i = integral_enhancement(&rates, &curve.gain, common.homodyne.into(), band, common.delay.into())?;
        println!("{}: I/I0 = {:.4} ({:.3} dB)", curve.label, i.normalized, i.normalized_db());
        rows.push(IntegralRow {
            label: curve.label.clone(),
            gain: curve.gain.name(),
            value_rad_s: i.value,
            normalized: i.normalized,
            normalized_db: i.normalized_db(),
            phi_lo_rad: i.phi_lo,
            band_rad_s: i.band,
        });
    }
    Ok(vec![write_file(&common.out, "integral.json", &(serde_json::to_string_pretty(&rows)? + "\n"))?])
}

/// Resolve an optimizer seed spec into a ZPK.
pub fn resolve_seed(spec: &str, config: &InterferometerConfig, margin_ug: f64, poles: Option<usize>) -> Result<(Zpk, Option<FitReport>)> {
    let rates = derive_rates(config)?;
    let (zpk, fit) = if spec == "pt" {
        (presets::pt_seed(config, margin_ug)?, None)
    } else if let Some(n) = spec.strip_prefix("vectfit") {
        let n = match n.strip_prefix(':') {
            Some(n) => n.parse().map_err(|_| Error::InvalidArgument(format!("bad pole count in seed {spec:?}")))?,
            None if n.is_empty() => poles.unwrap_or(3),
            None => return Err(Error::InvalidArgument(format!("unknown seed {spec:?}"))),
        };
        let fit = seed_from_gopt(&rates, n, default_seed_band(&rates), 400)?;
        (fit.zpk.clone(), Some(FitReport::new(&fit)))
    } else if let Some(name) = spec.strip_prefix("table:") {
        (table_zpk(name)?, None)
    } else if let Some(path) = spec.strip_prefix("zpk:") {
        (zpk_from_json(&std::fs::read_to_string(path)?)?, None)
    } else {
        return Err(Error::InvalidArgument(format!("unknown seed {spec:?}; expected pt, vectfit:N, table:NAME or zpk:PATH")));
    };
    if let Some(n) = poles {
        if zpk.poles.len() != n {
            return Err(Error::InvalidArgument(format!("seed {spec:?} has {} poles, --poles asked for {n}", zpk.poles.len())));
        }
    }
    Ok((zpk, fit))
}

pub fn cmd_optimize(common: &Common, seed: &str, poles: Option<usize>, max_iter: usize) -> Result<Vec<String>> {
    let config = load_config(common)?;
    let rates = derive_rates(&config)?;
    let mode: DelayMode = common.delay.into();
    let mut cost = CostOptions { mode, ..Default::default() };
    cost.nyquist.mode = mode;
    if let Some(b) = &common.band {
        cost.band = Some(parse_band(b)?);
    }
    let opts = OptimizeOptions { cost, nelder_mead: NelderMeadOptions { max_iter, ..Default::default() } };
    let (initial, fit) = resolve_seed(seed, &config, cost.margin_ug, poles)?;
    let mut outputs = Vec::new();
    if let Some(fit) = fit {
        outputs.push(write_file(&common.out, "seed_fit.json", &(serde_json::to_string_pretty(&fit)? + "\n"))?);
    }
    let result = optimize_filter(&config, &initial, &opts)?;
    let doc = OptimizationDocument::new(seed, &initial, &result, &rates, &opts);
    println!(
        "I/I0 = {:.4} ({:.3} dB), stable = {}, converged = {}",
        doc.normalized_i, doc.normalized_i_db, doc.stable, doc.converged
    );
    outputs.push(write_file(&common.out, "optimize.json", &(serde_json::to_string_pretty(&doc)? + "\n"))?);
    Ok(outputs)
}
