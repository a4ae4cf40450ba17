//! C interface to `mwg-core`.
//!
//! Every function returns an `MwgStatus` code. On failure the message is
//! available from [`mwg_last_error`] on the same thread until the next call.
//! Model handles are opaque; free them with the matching `_free` function.
//! Strings returned through out-pointers are owned by the caller and must be
//! released with [`mwg_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use mwg_core::concavity::exp_kernel_margin;
use mwg_core::cox::{simulate, CoxModel, CoxParams};
use mwg_core::diagnostics::iact;
use mwg_core::experiment::{cmd_couple, cmd_map, cmd_sample, cmd_sweep_tau, ExperimentConfig};
use mwg_core::pde::{simulate_pde_data, PdeModel, PdeSetup};
use mwg_core::target::Target;
use mwg_core::Error;

pub const MWG_OK: i32 = 0;
/// A required pointer argument was null.
pub const MWG_ERR_NULL: i32 = 1;
/// Invalid argument or configuration.
pub const MWG_ERR_INVALID: i32 = 2;
/// Numerical failure (non-finite values, factorization failure, I/O).
pub const MWG_ERR_NUMERICAL: i32 = 3;
/// A Rust panic was caught at the boundary.
pub const MWG_ERR_PANIC: i32 = 4;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> i32 {
    match e.exit_code() {
        2 => MWG_ERR_INVALID,
        _ => MWG_ERR_NUMERICAL,
    }
}

enum Fail {
    Null(&'static str),
    Invalid(String),
    Core(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> i32 {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MWG_OK,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            MWG_ERR_NULL
        }
        Ok(Err(Fail::Invalid(msg))) => {
            set_error(msg);
            MWG_ERR_INVALID
        }
        Ok(Err(Fail::Core(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            MWG_ERR_PANIC
        }
    }
}

unsafe fn slice<'a>(p: *const f64, n: usize, what: &'static str) -> Result<&'a [f64], Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

unsafe fn string(p: *const c_char, what: &'static str) -> Result<String, Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| Fail::Invalid(format!("{what} is not valid UTF-8")))
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next `mwg_` call on the same thread.
#[no_mangle]
pub extern "C" fn mwg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn mwg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Log-Gaussian Cox posterior on an `L × L` grid with default prior
/// parameters and data simulated from `data_seed`.
pub struct MwgCoxModel(CoxModel);

/// Elliptic inverse problem in KL coordinates (setup 1 or 2) with data
/// simulated from `data_seed`.
pub struct MwgPdeModel(PdeModel);

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mwg_cox_new(side: usize, data_seed: u64, out_model: *mut *mut MwgCoxModel) -> i32 {
    guard(|| {
        let slot = out(out_model, "out_model")?;
        let params = CoxParams::default();
        let data = simulate(side, &params, data_seed)?;
        let m = CoxModel::from_dataset(&data, params)?;
        *slot = Box::into_raw(Box::new(MwgCoxModel(m)));
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`mwg_cox_new`] and not have been freed; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn mwg_cox_free(model: *mut MwgCoxModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn mwg_pde_new(setup: u32, data_seed: u64, out_model: *mut *mut MwgPdeModel) -> i32 {
    guard(|| {
        let slot = out(out_model, "out_model")?;
        let s = PdeSetup::by_index(setup)?;
        let (_, m) = simulate_pde_data(&s, data_seed)?;
        *slot = Box::into_raw(Box::new(MwgPdeModel(m)));
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`mwg_pde_new`] and not have been freed; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn mwg_pde_free(model: *mut MwgPdeModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

unsafe fn dim_of(t: Option<&dyn Target>, out_dim: *mut usize) -> i32 {
    guard(|| {
        let t = t.ok_or(Fail::Null("model"))?;
        *out(out_dim, "out_dim")? = t.dim();
        Ok(())
    })
}

unsafe fn eval(t: Option<&dyn Target>, x: *const f64, n: usize, out_lp: *mut f64, out_grad: *mut f64) -> i32 {
    guard(|| {
        let t = t.ok_or(Fail::Null("model"))?;
        if n != t.dim() {
            return Err(Fail::Core(Error::DimensionMismatch { expected: t.dim(), got: n }));
        }
        let x = slice(x, n, "x")?;
        let lp_slot = out(out_lp, "out_log_density")?;
        let (lp, g) = t.log_density_and_grad(x);
        if !lp.is_finite() {
            return Err(Fail::Core(Error::NonFinite {
                index: 0,
                what: "log-density".into(),
            }));
        }
        *lp_slot = lp;
        if !out_grad.is_null() {
            std::slice::from_raw_parts_mut(out_grad, n).copy_from_slice(&g);
        }
        Ok(())
    })
}

/// # Safety
/// `model` must be a live handle or null; `out_dim` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mwg_cox_dim(model: *const MwgCoxModel, out_dim: *mut usize) -> i32 {
    dim_of(model.as_ref().map(|m| &m.0 as &dyn Target), out_dim)
}

/// Log-posterior (up to a constant) and, when `out_grad` is non-null, its
/// gradient written to `n` doubles.
///
/// # Safety
/// `x` must point to `n` doubles, `out_grad` to `n` doubles or be null.
#[no_mangle]
pub unsafe extern "C" fn mwg_cox_log_density(
    model: *const MwgCoxModel,
    x: *const f64,
    n: usize,
    out_log_density: *mut f64,
    out_grad: *mut f64,
) -> i32 {
    eval(model.as_ref().map(|m| &m.0 as &dyn Target), x, n, out_log_density, out_grad)
}

/// # Safety
/// As [`mwg_cox_dim`].
#[no_mangle]
pub unsafe extern "C" fn mwg_pde_dim(model: *const MwgPdeModel, out_dim: *mut usize) -> i32 {
    dim_of(model.as_ref().map(|m| &m.0 as &dyn Target), out_dim)
}

/// # Safety
/// As [`mwg_cox_log_density`].
#[no_mangle]
pub unsafe extern "C" fn mwg_pde_log_density(
    model: *const MwgPdeModel,
    theta: *const f64,
    n: usize,
    out_log_density: *mut f64,
    out_grad: *mut f64,
) -> i32 {
    eval(model.as_ref().map(|m| &m.0 as &dyn Target), theta, n, out_log_density, out_grad)
}

/// `λ_min(−H)` for the 1D exponential-kernel Gaussian `exp(-|i-j|/(2ℓ))`
/// of dimension `n` partitioned into blocks of size `q`.
///
/// # Safety
/// `out_margin` must be valid.
#[no_mangle]
pub unsafe extern "C" fn mwg_concavity_margin(n: usize, ell: f64, q: usize, out_margin: *mut f64) -> i32 {
    guard(|| {
        let slot = out(out_margin, "out_margin")?;
        if !(ell > 0.0) {
            return Err(Fail::Invalid(format!("ell must be positive, got {ell}")));
        }
        *slot = exp_kernel_margin(n, ell, q)?.margin;
        Ok(())
    })
}

/// Integrated autocorrelation time of a series of length `n` (at least 100).
///
/// # Safety
/// `series` must point to `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn mwg_iact(series: *const f64, n: usize, out_iact: *mut f64) -> i32 {
    guard(|| {
        let s = slice(series, n, "series")?;
        let slot = out(out_iact, "out_iact")?;
        *slot = iact(s)?.iact;
        Ok(())
    })
}

/// Runs an experiment command (`sample`, `couple`, `sweep-tau` or `map`)
/// configured by a TOML document and returns its result as JSON.
///
/// # Safety
/// `command` and `config_toml` must be NUL-terminated; `out_json` valid.
#[no_mangle]
pub unsafe extern "C" fn mwg_run_experiment(
    command: *const c_char,
    config_toml: *const c_char,
    out_json: *mut *mut c_char,
) -> i32 {
    guard(|| {
        let cmd = string(command, "command")?;
        let text = string(config_toml, "config_toml")?;
        let slot = out(out_json, "out_json")?;
        let cfg = ExperimentConfig::from_toml(&text)?;
        let json = match cmd.as_str() {
            "sample" => serde_json::to_string(&cmd_sample(&cfg)?),
            "couple" => serde_json::to_string(&cmd_couple(&cfg)?),
            "sweep-tau" => serde_json::to_string(&cmd_sweep_tau(&cfg)?),
            "map" => serde_json::to_string(&cmd_map(&cfg)?),
            other => return Err(Fail::Invalid(format!("unknown command `{other}`"))),
        }
        .map_err(|e| Fail::Invalid(e.to_string()))?;
        *slot = CString::new(json).map_err(|e| Fail::Invalid(e.to_string()))?.into_raw();
        Ok(())
    })
}
