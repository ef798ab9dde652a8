//! C ABI over `qbm-core`.
//!
//! Objects are opaque handles created by `qbm_*_new`/`qbm_*_load` and
//! released by the matching `qbm_*_free`. Every fallible call returns a
//! [`QbmStatus`]; on failure the message is available from
//! [`qbm_last_error`] on the same thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use qbm_core::app::{self, RunOptions};
use qbm_core::bath::BathSpec;
use qbm_core::config::ExperimentConfig;
use qbm_core::noise::NoiseStatistics;
use qbm_core::observables::ObservableSeries;
use qbm_core::{reference, Error};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QbmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    OutOfRange = 3,
    Domain = 10,
    Config = 11,
    Quadrature = 12,
    Integration = 13,
    EnsembleAborted = 14,
    SignProblem = 15,
    Envelope = 16,
    Unsupported = 17,
    Misuse = 18,
    Io = 19,
    Format = 20,
    Panic = 99,
}

/// Noise statistics selector.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QbmStatistics {
    Quantum = 0,
    Classical = 1,
    White = 2,
}

impl From<QbmStatistics> for NoiseStatistics {
    fn from(s: QbmStatistics) -> Self {
        match s {
            QbmStatistics::Quantum => NoiseStatistics::Quantum,
            QbmStatistics::Classical => NoiseStatistics::Classical,
            QbmStatistics::White => NoiseStatistics::White,
        }
    }
}

/// Bath parameters.
pub struct QbmBath(BathSpec);

/// A parsed experiment config.
pub struct QbmConfig(ExperimentConfig);

/// Series produced by [`qbm_run`], one per configured observable, followed
/// by the reference curve when the config asks for one.
pub struct QbmResult {
    series: Vec<ObservableSeries>,
    names: Vec<CString>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Fail(QbmStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Domain(_) => QbmStatus::Domain,
            Error::Config { .. } => QbmStatus::Config,
            Error::Quadrature { .. } => QbmStatus::Quadrature,
            Error::Integration { .. } => QbmStatus::Integration,
            Error::EnsembleAborted { .. } => QbmStatus::EnsembleAborted,
            Error::SignProblem { .. } => QbmStatus::SignProblem,
            Error::Envelope { .. } => QbmStatus::Envelope,
            Error::Unsupported(_) => QbmStatus::Unsupported,
            Error::Misuse(_) => QbmStatus::Misuse,
            Error::Io { .. } => QbmStatus::Io,
            Error::Format { .. } => QbmStatus::Format,
        };
        Fail(code, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> QbmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QbmStatus::Ok,
        Ok(Err(Fail(code, msg))) => {
            set_error(msg);
            code
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            QbmStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(QbmStatus::NullPointer, format!("{what} is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn deref_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn string<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Fail(QbmStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn qbm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qbm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Ohmic bath with exponential cutoff.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qbm_bath_new(
    gamma: f64,
    eps: f64,
    mass: f64,
    hbar: f64,
    kt: f64,
    out: *mut *mut QbmBath,
) -> QbmStatus {
    guard(|| {
        let spec = BathSpec::ohmic(gamma, eps, mass, hbar, kt)?;
        put(out, Box::into_raw(Box::new(QbmBath(spec))), "out")
    })
}

/// # Safety
/// `bath` must come from [`qbm_bath_new`] and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn qbm_bath_free(bath: *mut QbmBath) {
    if !bath.is_null() {
        drop(Box::from_raw(bath));
    }
}

/// Spectral density J(ω).
///
/// # Safety
/// `bath` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qbm_bath_spectral_density(bath: *const QbmBath, omega: f64, out: *mut f64) -> QbmStatus {
    guard(|| {
        let b = deref(bath, "bath")?;
        put(out, b.0.spectral_density(omega)?, "out")
    })
}

/// Memory kernel M(t).
///
/// # Safety
/// `bath` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qbm_bath_memory_kernel(bath: *const QbmBath, t: f64, out: *mut f64) -> QbmStatus {
    guard(|| {
        let b = deref(bath, "bath")?;
        put(out, b.0.memory_kernel(t), "out")
    })
}

/// Power spectral density of the quantum noise.
///
/// # Safety
/// `bath` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qbm_bath_noise_psd(bath: *const QbmBath, omega: f64, out: *mut f64) -> QbmStatus {
    guard(|| {
        let b = deref(bath, "bath")?;
        put(out, b.0.noise_psd(omega)?, "out")
    })
}

/// Symmetrized quantum noise correlation at `lag`.
///
/// # Safety
/// `bath` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qbm_bath_noise_correlation(bath: *const QbmBath, lag: f64, out: *mut f64) -> QbmStatus {
    guard(|| {
        let b = deref(bath, "bath")?;
        put(out, b.0.quantum_correlation(lag)?, "out")
    })
}

/// Zero-temperature momentum variance of a free particle released at t = 0.
///
/// # Safety
/// `bath` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qbm_p2_quadrature(bath: *const QbmBath, t: f64, out: *mut f64) -> QbmStatus {
    guard(|| {
        let b = deref(bath, "bath")?;
        put(out, reference::p2_quadrature(&b.0, t)?, "out")
    })
}

/// Stationary momentum variance of a free particle.
///
/// # Safety
/// `bath` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qbm_stationary_p2(
    bath: *const QbmBath,
    statistics: QbmStatistics,
    out: *mut f64,
) -> QbmStatus {
    guard(|| {
        let b = deref(bath, "bath")?;
        put(out, reference::stationary_p2(&b.0, statistics.into())?, "out")
    })
}

/// Parse a TOML experiment config.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qbm_config_parse(text: *const c_char, out: *mut *mut QbmConfig) -> QbmStatus {
    guard(|| {
        let cfg = ExperimentConfig::parse(string(text, "text")?, "<string>")?;
        put(out, Box::into_raw(Box::new(QbmConfig(cfg))), "out")
    })
}

/// Load a config file, or a bundled preset when no such file exists.
///
/// # Safety
/// `path_or_preset` must be a NUL-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qbm_config_load(path_or_preset: *const c_char, out: *mut *mut QbmConfig) -> QbmStatus {
    guard(|| {
        let cfg = app::load_config(string(path_or_preset, "path_or_preset")?)?;
        put(out, Box::into_raw(Box::new(QbmConfig(cfg))), "out")
    })
}

/// # Safety
/// `config` must come from a `qbm_config_*` constructor and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn qbm_config_free(config: *mut QbmConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Override the master seed.
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn qbm_config_set_seed(config: *mut QbmConfig, seed: u64) -> QbmStatus {
    guard(|| {
        deref_mut(config, "config")?.0.run.seed = seed;
        Ok(())
    })
}

/// Override the trajectory count; must be positive.
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn qbm_config_set_n_traj(config: *mut QbmConfig, n_traj: usize) -> QbmStatus {
    guard(|| {
        let c = deref_mut(config, "config")?;
        let old = c.0.run.n_traj;
        c.0.run.n_traj = n_traj;
        if let Err(e) = c.0.validate() {
            c.0.run.n_traj = old;
            return Err(e.into());
        }
        Ok(())
    })
}

/// Run the experiment. Files are written to `out_dir`, or to the directory
/// the config and environment select when `out_dir` is null. `workers` of 0
/// uses every core.
///
/// # Safety
/// `config` must be a live handle, `out_dir` null or a NUL-terminated string,
/// and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qbm_run(
    config: *const QbmConfig,
    out_dir: *const c_char,
    workers: usize,
    out: *mut *mut QbmResult,
) -> QbmStatus {
    guard(|| {
        let cfg = deref(config, "config")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let out_dir = if out_dir.is_null() {
            None
        } else {
            Some(PathBuf::from(string(out_dir, "out_dir")?))
        };
        let opts = RunOptions {
            workers: (workers > 0).then_some(workers),
            out_dir,
            ..Default::default()
        };
        let summary = app::run(&cfg.0, &opts)?;
        let mut series = summary.series;
        series.extend(summary.reference);
        let names = series
            .iter()
            .map(|s| CString::new(s.name.replace('\0', " ")).expect("nul bytes removed"))
            .collect();
        put(out, Box::into_raw(Box::new(QbmResult { series, names })), "out")
    })
}

/// # Safety
/// `result` must come from [`qbm_run`] and not be used afterwards. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn qbm_result_free(result: *mut QbmResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Number of series in a result; 0 for null.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qbm_result_series_count(result: *const QbmResult) -> usize {
    result.as_ref().map_or(0, |r| r.series.len())
}

unsafe fn series<'a>(result: *const QbmResult, index: usize) -> Result<(&'a QbmResult, &'a ObservableSeries), Fail> {
    let r = deref(result, "result")?;
    let s = r.series.get(index).ok_or_else(|| {
        Fail(
            QbmStatus::OutOfRange,
            format!("series {index} of {}", r.series.len()),
        )
    })?;
    Ok((r, s))
}

/// Name of series `index`, valid while the result lives; null when out of range.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qbm_result_series_name(result: *const QbmResult, index: usize) -> *const c_char {
    result
        .as_ref()
        .and_then(|r| r.names.get(index))
        .map_or(ptr::null(), |c| c.as_ptr())
}

/// Number of time points in series `index`.
///
/// # Safety
/// `result` must be a live handle and `len` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn qbm_result_series_len(result: *const QbmResult, index: usize, len: *mut usize) -> QbmStatus {
    guard(|| {
        let (_, s) = series(result, index)?;
        put(len, s.len(), "len")
    })
}

/// Copy series `index` into caller buffers of `capacity` elements each. Any
/// buffer may be null to skip it; `capacity` must be at least the series length.
///
/// # Safety
/// Non-null buffers must be valid for `capacity` writes.
#[no_mangle]
pub unsafe extern "C" fn qbm_result_series_copy(
    result: *const QbmResult,
    index: usize,
    times: *mut f64,
    estimates: *mut f64,
    standard_errors: *mut f64,
    effective_n: *mut f64,
    capacity: usize,
) -> QbmStatus {
    guard(|| {
        let (_, s) = series(result, index)?;
        if capacity < s.len() {
            return Err(Fail(
                QbmStatus::OutOfRange,
                format!("capacity {capacity} below series length {}", s.len()),
            ));
        }
        for (dst, src) in [
            (times, &s.times),
            (estimates, &s.estimates),
            (standard_errors, &s.standard_errors),
            (effective_n, &s.effective_n),
        ] {
            if !dst.is_null() {
                ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
            }
        }
        Ok(())
    })
}
