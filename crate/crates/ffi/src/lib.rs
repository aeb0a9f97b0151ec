//! C ABI over the netmfg simulator.
//!
//! Handles are opaque pointers created by the `default`, `parse` and
//! `run_trial` functions and released with the matching `_free`. Every fallible call
//! returns a [`NetmfgStatus`]; on failure `netmfg_last_error()` describes the
//! most recent error on the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use netmfg::cli::run_experiment;
use netmfg::config::{parse_config, ExperimentConfig};
use netmfg::io::write_trial_csv;
use netmfg::learning::project_simplex;
use netmfg::metrics::{Metric, RunLog};
use netmfg::orchestrator::run_trial;
use netmfg::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetmfgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    InvalidInput = 4,
    Io = 5,
    OutOfRange = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetmfgMetric {
    Exploitability = 0,
    AvgReturn = 1,
    PolicyDivergence = 2,
}

impl From<Metric> for NetmfgMetric {
    fn from(m: Metric) -> Self {
        match m {
            Metric::Exploitability => NetmfgMetric::Exploitability,
            Metric::AvgReturn => NetmfgMetric::AvgReturn,
            Metric::PolicyDivergence => NetmfgMetric::PolicyDivergence,
        }
    }
}

/// Experiment configuration.
pub struct NetmfgConfig {
    inner: ExperimentConfig,
}

/// Metric log of one trial.
pub struct NetmfgRunLog {
    log: RunLog,
    rows: Vec<(usize, Metric, f64)>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).expect("nul bytes removed"));
}

fn fail(status: NetmfgStatus, message: impl Into<String>) -> NetmfgStatus {
    set_error(message);
    status
}

fn from_error(e: Error) -> NetmfgStatus {
    let status = match e {
        Error::Config { .. } | Error::Range { .. } => NetmfgStatus::Config,
        Error::Io { .. } | Error::Csv(_) | Error::Schema { .. } => NetmfgStatus::Io,
        Error::InvalidInput(_) | Error::MismatchedConfig { .. } => NetmfgStatus::InvalidInput,
    };
    fail(status, e.to_string())
}

/// Runs `body`, converting panics into [`NetmfgStatus::Panic`].
fn guarded(body: impl FnOnce() -> NetmfgStatus) -> NetmfgStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => fail(NetmfgStatus::Panic, "internal panic"),
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, NetmfgStatus> {
    if p.is_null() {
        return Err(fail(NetmfgStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(NetmfgStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

macro_rules! try_status {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(status) => return status,
        }
    };
}

macro_rules! non_null {
    ($p:expr, $what:literal) => {
        if $p.is_null() {
            return fail(NetmfgStatus::NullPointer, concat!($what, " is null"));
        }
    };
}

/// Message for the last failed call on this thread; empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn netmfg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Default configuration.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn netmfg_config_default(out: *mut *mut NetmfgConfig) -> NetmfgStatus {
    guarded(|| {
        non_null!(out, "out");
        *out = Box::into_raw(Box::new(NetmfgConfig {
            inner: ExperimentConfig::default(),
        }));
        NetmfgStatus::Ok
    })
}

/// Parses `key = value` configuration text.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` as in [`netmfg_config_default`].
#[no_mangle]
pub unsafe extern "C" fn netmfg_config_parse(text: *const c_char, out: *mut *mut NetmfgConfig) -> NetmfgStatus {
    guarded(|| {
        non_null!(out, "out");
        *out = ptr::null_mut();
        let text = try_status!(str_arg(text, "text"));
        match parse_config(text) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(NetmfgConfig { inner }));
                NetmfgStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Sets one key; the configuration is revalidated and left unchanged on error.
///
/// # Safety
/// `cfg` must be a live handle; `key` and `value` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn netmfg_config_set(
    cfg: *mut NetmfgConfig,
    key: *const c_char,
    value: *const c_char,
) -> NetmfgStatus {
    guarded(|| {
        non_null!(cfg, "cfg");
        let key = try_status!(str_arg(key, "key"));
        let value = try_status!(str_arg(value, "value"));
        let mut updated = (*cfg).inner.clone();
        if let Err(message) = updated.set(key, value) {
            return fail(NetmfgStatus::Config, message);
        }
        if let Err(e) = updated.validate() {
            return from_error(e);
        }
        (*cfg).inner = updated;
        NetmfgStatus::Ok
    })
}

/// Copies the NUL-terminated config digest into `buf`. `needed` (optional)
/// receives the required size including the terminator.
///
/// # Safety
/// `cfg` must be a live handle; `buf` must hold `len` bytes (may be null if `len` is 0).
#[no_mangle]
pub unsafe extern "C" fn netmfg_config_digest(
    cfg: *const NetmfgConfig,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> NetmfgStatus {
    guarded(|| {
        non_null!(cfg, "cfg");
        let digest = (*cfg).inner.digest();
        let bytes = digest.as_bytes();
        if !needed.is_null() {
            *needed = bytes.len() + 1;
        }
        if buf.is_null() || len < bytes.len() + 1 {
            return fail(NetmfgStatus::BufferTooSmall, "digest buffer too small");
        }
        ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), bytes.len());
        *buf.add(bytes.len()) = 0;
        NetmfgStatus::Ok
    })
}

/// # Safety
/// `cfg` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn netmfg_config_free(cfg: *mut NetmfgConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Runs one trial with the given seed.
///
/// # Safety
/// `cfg` must be a live handle; `out` writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn netmfg_run_trial(
    cfg: *const NetmfgConfig,
    seed: u64,
    out: *mut *mut NetmfgRunLog,
) -> NetmfgStatus {
    guarded(|| {
        non_null!(cfg, "cfg");
        non_null!(out, "out");
        *out = ptr::null_mut();
        let cfg = &(*cfg).inner;
        let result = cfg
            .scenario(seed)
            .and_then(|sc| run_trial(&sc, &cfg.metrics_options()));
        match result {
            Ok(output) => {
                let rows = output.log.rows().collect();
                *out = Box::into_raw(Box::new(NetmfgRunLog { log: output.log, rows }));
                NetmfgStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Runs every trial of the configuration and writes the run directory.
///
/// # Safety
/// `cfg` must be a live handle; `dir` a NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn netmfg_run_experiment(cfg: *const NetmfgConfig, dir: *const c_char) -> NetmfgStatus {
    guarded(|| {
        non_null!(cfg, "cfg");
        let dir = try_status!(str_arg(dir, "dir"));
        match run_experiment(&(*cfg).inner, Path::new(dir)) {
            Ok(_) => NetmfgStatus::Ok,
            Err(e) => from_error(e),
        }
    })
}

/// Number of rows in the log (0 for a null handle).
///
/// # Safety
/// `log` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn netmfg_run_log_len(log: *const NetmfgRunLog) -> usize {
    if log.is_null() {
        0
    } else {
        (*log).rows.len()
    }
}

/// Reads row `index` (ordered by k, then metric).
///
/// # Safety
/// `log` must be a live handle; output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn netmfg_run_log_row(
    log: *const NetmfgRunLog,
    index: usize,
    k: *mut usize,
    metric: *mut NetmfgMetric,
    value: *mut f64,
) -> NetmfgStatus {
    guarded(|| {
        non_null!(log, "log");
        if k.is_null() || metric.is_null() || value.is_null() {
            return fail(NetmfgStatus::NullPointer, "output pointer is null");
        }
        let rows = &(*log).rows;
        let Some(&(row_k, row_metric, row_value)) = rows.get(index) else {
            return fail(NetmfgStatus::OutOfRange, format!("row {index} of {}", rows.len()));
        };
        *k = row_k;
        *metric = row_metric.into();
        *value = row_value;
        NetmfgStatus::Ok
    })
}

/// Writes the log in the `k,metric,value` trial format.
///
/// # Safety
/// `log` must be a live handle; `path` a NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn netmfg_run_log_write_csv(log: *const NetmfgRunLog, path: *const c_char) -> NetmfgStatus {
    guarded(|| {
        non_null!(log, "log");
        let path = try_status!(str_arg(path, "path"));
        match write_trial_csv(&(*log).log, Path::new(path)) {
            Ok(()) => NetmfgStatus::Ok,
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `log` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn netmfg_run_log_free(log: *mut NetmfgRunLog) {
    if !log.is_null() {
        drop(Box::from_raw(log));
    }
}

/// Euclidean projection of `v[0..n]` onto the probability simplex, into `out`.
///
/// # Safety
/// `v` and `out` must each hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn netmfg_project_simplex(v: *const f64, n: usize, out: *mut f64) -> NetmfgStatus {
    guarded(|| {
        non_null!(v, "v");
        non_null!(out, "out");
        if n == 0 {
            return fail(NetmfgStatus::InvalidInput, "empty vector");
        }
        let input = std::slice::from_raw_parts(v, n);
        if input.iter().any(|x| !x.is_finite()) {
            return fail(NetmfgStatus::InvalidInput, "non-finite entry");
        }
        let projected = project_simplex(input);
        ptr::copy_nonoverlapping(projected.as_ptr(), out, n);
        NetmfgStatus::Ok
    })
}
