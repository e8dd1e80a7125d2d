//! C ABI over `pifilter`.
//!
//! Configurations and gains are opaque heap handles released with the
//! matching `*_free`. Every fallible call returns a [`PifStatus`]; on failure
//! the message is kept per thread and read back with [`pif_last_error`].
//! Outputs are written only on success.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use num_complex::Complex64;
use pifilter::optimize::{optimize_filter, OptimizeOptions};
use pifilter::response::{chi_point, integral_enhancement, Homodyne};
use pifilter::stability::{nyquist, NyquistOptions};
use pifilter::{derive_rates, DelayMode, Error, GainModel, InterferometerConfig, Zpk};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PifStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidConfig = 3,
    Singular = 4,
    Quadrature = 5,
    IllPosedFit = 6,
    Indeterminate = 7,
    InfeasibleSeed = 8,
    Io = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PifHomodyne {
    /// One angle maximising the band integral.
    Global = 0,
    /// Best angle at every frequency.
    PerFrequency = 1,
}

/// Closed-loop verdict of a Nyquist run.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PifVerdict {
    pub n: i64,
    pub p: i64,
    pub z: i64,
    pub rho_min: f64,
    pub stable: bool,
}

/// Opaque interferometer configuration.
pub struct PifConfig(InterferometerConfig);

/// Opaque filter gain.
pub struct PifGain(GainModel);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> PifStatus {
    match err {
        Error::InvalidConfig(_) => PifStatus::InvalidConfig,
        Error::InvalidArgument(_) | Error::NotRational(_) | Error::Json(_) => PifStatus::InvalidArgument,
        Error::Singular { .. } => PifStatus::Singular,
        Error::Quadrature { .. } | Error::Cost { .. } => PifStatus::Quadrature,
        Error::IllPosedFit { .. } => PifStatus::IllPosedFit,
        Error::Indeterminate { .. } => PifStatus::Indeterminate,
        Error::InfeasibleSeed(_) => PifStatus::InfeasibleSeed,
        Error::Io(_) => PifStatus::Io,
    }
}

/// Run `f`, translating errors and panics into a status.
fn guard<F: FnOnce() -> Result<(), PifStatus>>(f: F) -> PifStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PifStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => {
            set_error("internal panic".into());
            PifStatus::Panic
        }
    }
}

fn check<T>(r: pifilter::Result<T>) -> Result<T, PifStatus> {
    r.map_err(|e| {
        let status = status_of(&e);
        set_error(e.to_string());
        status
    })
}

unsafe fn deref<'a, T>(p: *const T) -> Result<&'a T, PifStatus> {
    p.as_ref().ok_or_else(|| {
        set_error("null pointer argument".into());
        PifStatus::NullPointer
    })
}

unsafe fn out<'a, T>(p: *mut T) -> Result<&'a mut T, PifStatus> {
    p.as_mut().ok_or_else(|| {
        set_error("null output pointer".into());
        PifStatus::NullPointer
    })
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Message of the most recent failure on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pif_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pif_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// The lossless 4 km / 40 m reference configuration.
#[no_mangle]
pub extern "C" fn pif_config_reference() -> *mut PifConfig {
    boxed(PifConfig(InterferometerConfig::reference()))
}

/// Parse a configuration from JSON.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out_config` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pif_config_from_json(json: *const c_char, out_config: *mut *mut PifConfig) -> PifStatus {
    guard(|| {
        let out_config = out(out_config)?;
        if json.is_null() {
            set_error("null pointer argument".into());
            return Err(PifStatus::NullPointer);
        }
        let text = CStr::from_ptr(json).to_str().map_err(|_| {
            set_error("configuration is not UTF-8".into());
            PifStatus::InvalidArgument
        })?;
        let cfg = check(InterferometerConfig::from_json(text))?;
        *out_config = boxed(PifConfig(cfg));
        Ok(())
    })
}

/// Replace the loss budget of a configuration.
///
/// # Safety
/// `config` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn pif_config_set_losses(config: *mut PifConfig, lambda_o: f64, lambda_f: f64, lambda_s: f64) -> PifStatus {
    guard(|| {
        let cfg = out(config)?;
        let next = cfg.0.with_losses(lambda_o, lambda_f, lambda_s);
        check(next.validate())?;
        cfg.0 = next;
        Ok(())
    })
}

/// # Safety
/// `config` must come from this library or be NULL; it must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pif_config_free(config: *mut PifConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Sensing-cavity bandwidth in rad/s.
///
/// # Safety
/// `config` must be a live handle; `out_gamma_s` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pif_gamma_s(config: *const PifConfig, out_gamma_s: *mut f64) -> PifStatus {
    guard(|| {
        let rates = check(derive_rates(&deref(config)?.0))?;
        *out(out_gamma_s)? = rates.gamma_s;
        Ok(())
    })
}

#[no_mangle]
pub extern "C" fn pif_gain_unity() -> *mut PifGain {
    boxed(PifGain(GainModel::Unity))
}

#[no_mangle]
pub extern "C" fn pif_gain_optimal() -> *mut PifGain {
    boxed(PifGain(GainModel::Optimal))
}

#[no_mangle]
pub extern "C" fn pif_gain_detuned(phi: f64) -> *mut PifGain {
    boxed(PifGain(GainModel::Detuned { phi }))
}

/// Optomechanical gain with mechanical frequency `f_m` (Hz), quality factor
/// `q_m` and coupling `g` (rad/s); `g < 0` selects the PT condition of `config`.
///
/// # Safety
/// `config` must be a live handle; `out_gain` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pif_gain_pt(config: *const PifConfig, f_m: f64, q_m: f64, g: f64, out_gain: *mut *mut PifGain) -> PifStatus {
    guard(|| {
        let out_gain = out(out_gain)?;
        let rates = check(derive_rates(&deref(config)?.0))?;
        let g = if g < 0.0 { pifilter::model::pt_condition_coupling(&rates) } else { g };
        let model = GainModel::PtSymmetric { f_m, q_m, g };
        check(model.validate())?;
        *out_gain = boxed(PifGain(model));
        Ok(())
    })
}

/// Rational gain from root arrays in rad/s (`n` zeros and `n` poles).
///
/// # Safety
/// Each array must hold `n` values; `out_gain` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pif_gain_zpk(
    zeros_re: *const f64,
    zeros_im: *const f64,
    poles_re: *const f64,
    poles_im: *const f64,
    n: usize,
    k: f64,
    out_gain: *mut *mut PifGain,
) -> PifStatus {
    guard(|| {
        let out_gain = out(out_gain)?;
        let roots = |re: *const f64, im: *const f64| -> Result<Vec<Complex64>, PifStatus> {
            if n == 0 {
                return Ok(Vec::new());
            }
            if re.is_null() || im.is_null() {
                set_error("null root array".into());
                return Err(PifStatus::NullPointer);
            }
            let re = std::slice::from_raw_parts(re, n);
            let im = std::slice::from_raw_parts(im, n);
            Ok(re.iter().zip(im).map(|(a, b)| Complex64::new(*a, *b)).collect())
        };
        let zpk = check(Zpk::new(roots(zeros_re, zeros_im)?, roots(poles_re, poles_im)?, k))?;
        *out_gain = boxed(PifGain(GainModel::Rational(zpk)));
        Ok(())
    })
}

/// Number of poles of a rational gain, or 0 for other gain kinds.
///
/// # Safety
/// `gain` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn pif_gain_order(gain: *const PifGain) -> usize {
    match gain.as_ref() {
        Some(PifGain(GainModel::Rational(z))) => z.order(),
        _ => 0,
    }
}

/// Copy the roots (rad/s) and gain of a rational gain into caller arrays of
/// length `pif_gain_order(gain)`.
///
/// # Safety
/// Arrays must hold `pif_gain_order(gain)` values; `out_k` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pif_gain_zpk_roots(
    gain: *const PifGain,
    zeros_re: *mut f64,
    zeros_im: *mut f64,
    poles_re: *mut f64,
    poles_im: *mut f64,
    out_k: *mut f64,
) -> PifStatus {
    guard(|| {
        let PifGain(GainModel::Rational(zpk)) = deref(gain)? else {
            set_error("gain is not rational".into());
            return Err(PifStatus::InvalidArgument);
        };
        let n = zpk.order();
        for (arr_re, arr_im, src) in [(zeros_re, zeros_im, &zpk.zeros), (poles_re, poles_im, &zpk.poles)] {
            if n > 0 && (arr_re.is_null() || arr_im.is_null()) {
                set_error("null root array".into());
                return Err(PifStatus::NullPointer);
            }
            for (i, r) in src.iter().enumerate() {
                *arr_re.add(i) = r.re;
                *arr_im.add(i) = r.im;
            }
        }
        *out(out_k)? = zpk.k;
        Ok(())
    })
}

/// # Safety
/// `gain` must come from this library or be NULL; it must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn pif_gain_free(gain: *mut PifGain) {
    if !gain.is_null() {
        drop(Box::from_raw(gain));
    }
}

/// SNR enhancement `chi^2` at `omega` (rad/s) with the homodyne angle
/// chosen per frequency; the angle is written to `out_phi_lo` when non-NULL.
///
/// # Safety
/// Handles must be live; `out_chi_sq` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pif_chi_sq(
    config: *const PifConfig,
    gain: *const PifGain,
    omega: f64,
    out_chi_sq: *mut f64,
    out_phi_lo: *mut f64,
) -> PifStatus {
    guard(|| {
        let rates = check(derive_rates(&deref(config)?.0))?;
        let p = check(chi_point(&rates, &deref(gain)?.0, omega, Homodyne::PerFrequency, DelayMode::Exact))?;
        *out(out_chi_sq)? = p.chi_sq;
        if let Some(phi) = out_phi_lo.as_mut() {
            *phi = p.phi_lo;
        }
        Ok(())
    })
}

/// Band integral of `chi^2` over `[lo, hi]` rad/s, normalised by `pi / tau_s`.
///
/// # Safety
/// Handles must be live; `out_normalized` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pif_integral(
    config: *const PifConfig,
    gain: *const PifGain,
    homodyne: PifHomodyne,
    lo: f64,
    hi: f64,
    out_normalized: *mut f64,
) -> PifStatus {
    guard(|| {
        let rates = check(derive_rates(&deref(config)?.0))?;
        let h = match homodyne {
            PifHomodyne::Global => Homodyne::GlobalOptimal,
            PifHomodyne::PerFrequency => Homodyne::PerFrequency,
        };
        let i = check(integral_enhancement(&rates, &deref(gain)?.0, h, (lo, hi), DelayMode::Exact))?;
        *out(out_normalized)? = i.normalized;
        Ok(())
    })
}

/// Nyquist verdict; `omega_max <= 0` selects the default contour range.
///
/// # Safety
/// Handles must be live; `out_verdict` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pif_nyquist(
    config: *const PifConfig,
    gain: *const PifGain,
    omega_max: f64,
    out_verdict: *mut PifVerdict,
) -> PifStatus {
    guard(|| {
        let rates = check(derive_rates(&deref(config)?.0))?;
        let opts = NyquistOptions { omega_max: (omega_max > 0.0).then_some(omega_max), ..Default::default() };
        let r = check(nyquist(&rates, &deref(gain)?.0, &opts))?;
        *out(out_verdict)? = PifVerdict { n: r.n, p: r.p, z: r.z, rho_min: r.rho_min, stable: r.stable() };
        Ok(())
    })
}

/// Optimize a rational seed; the result is a new rational gain handle.
///
/// # Safety
/// Handles must be live; output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn pif_optimize(
    config: *const PifConfig,
    seed: *const PifGain,
    max_iter: usize,
    out_gain: *mut *mut PifGain,
    out_normalized: *mut f64,
    out_stable: *mut bool,
) -> PifStatus {
    guard(|| {
        let cfg = deref(config)?.0;
        let PifGain(GainModel::Rational(zpk)) = deref(seed)? else {
            set_error("seed gain must be rational".into());
            return Err(PifStatus::InvalidArgument);
        };
        let out_gain = out(out_gain)?;
        let out_normalized = out(out_normalized)?;
        let out_stable = out(out_stable)?;
        let mut opts = OptimizeOptions::default();
        opts.nelder_mead.max_iter = max_iter;
        let r = check(optimize_filter(&cfg, zpk, &opts))?;
        *out_normalized = r.normalized_i;
        *out_stable = r.stable;
        *out_gain = boxed(PifGain(GainModel::Rational(r.zpk)));
        Ok(())
    })
}
