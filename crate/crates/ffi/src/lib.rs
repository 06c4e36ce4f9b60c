//! C ABI over the transport solvers and the experiment runner.
//!
//! Conventions:
//! - every function returns an [`OtbStatus`] code; `OTB_OK` is zero;
//! - objects cross the boundary as opaque handles freed by their matching
//!   `*_free` function;
//! - tables are row-major `double` arrays with explicit dimensions;
//! - the last error message is thread-local, fetched with
//!   [`otb_last_error_message`];
//! - strings returned by the library are freed with [`otb_string_free`].
//!
//! The generated header lands in `include/otbandit.h` at build time.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use otbandit::env::BanditEnv;
use otbandit::harness::export::envelope;
use otbandit::harness::runner::run_experiment_on;
use otbandit::harness::{EnvSpec, ExperimentConfig};
use otbandit::measures::{CostTable, DiscreteMeasure};
use otbandit::table::Table;
use otbandit::transport::{
    kantorovich_exact, sinkhorn_allow_unconverged, SinkhornOptions,
};

/// Status codes returned by every entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OtbStatus {
    /// Success.
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// Arguments failed validation (dimensions, ranges, UTF-8).
    InvalidArgument = 2,
    /// JSON parsing or serialization failed.
    Json = 3,
    /// A solver reported an error.
    Solver = 4,
    /// The solve hit its iteration budget; outputs carry the flagged result.
    Unconverged = 5,
    /// Internal panic; state may be inconsistent.
    Internal = 6,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let owned = msg.into();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(owned).unwrap_or_default();
    });
}

fn guard(f: impl FnOnce() -> OtbStatus) -> OtbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            OtbStatus::Internal
        }
    }
}

/// Opaque environment handle.
pub struct OtbEnv {
    inner: BanditEnv,
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn otb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Copy the last error message into `buf` (NUL-terminated, truncated to
/// `cap`). Returns the full message length.
#[no_mangle]
pub unsafe extern "C" fn otb_last_error_message(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let msg = slot.borrow();
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        bytes.len().saturating_sub(1)
    })
}

unsafe fn read_str<'a>(ptr: *const c_char) -> Result<&'a str, OtbStatus> {
    if ptr.is_null() {
        set_error("null string pointer");
        return Err(OtbStatus::NullPointer);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error("string is not valid UTF-8");
        OtbStatus::InvalidArgument
    })
}

unsafe fn read_slice<'a>(ptr: *const f64, len: usize) -> Result<&'a [f64], OtbStatus> {
    if ptr.is_null() {
        set_error("null array pointer");
        return Err(OtbStatus::NullPointer);
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

fn measure_from_weights(weights: &[f64]) -> Result<DiscreteMeasure, OtbStatus> {
    let points = (0..weights.len()).map(|i| vec![i as f64]).collect();
    DiscreteMeasure::new(points, weights.to_vec()).map_err(|e| {
        set_error(e.to_string());
        OtbStatus::InvalidArgument
    })
}

/// Build an environment from an env-spec JSON document (the `env` block of
/// an experiment config). On success `*out` owns the handle.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn otb_env_from_json(
    json: *const c_char,
    out: *mut *mut OtbEnv,
) -> OtbStatus {
    guard(|| {
        if out.is_null() {
            set_error("null output pointer");
            return OtbStatus::NullPointer;
        }
        let text = match read_str(json) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let spec: EnvSpec = match serde_json::from_str(text) {
            Ok(s) => s,
            Err(e) => {
                set_error(format!("env spec: {e}"));
                return OtbStatus::Json;
            }
        };
        match spec.build() {
            Ok(env) => {
                *out = Box::into_raw(Box::new(OtbEnv { inner: env }));
                OtbStatus::Ok
            }
            Err(e) => {
                set_error(e.to_string());
                OtbStatus::InvalidArgument
            }
        }
    })
}

/// # Safety
/// `env` must come from [`otb_env_from_json`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn otb_env_free(env: *mut OtbEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Grid dimensions of the environment.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn otb_env_grid(
    env: *const OtbEnv,
    out_k: *mut usize,
    out_kp: *mut usize,
) -> OtbStatus {
    guard(|| {
        if env.is_null() || out_k.is_null() || out_kp.is_null() {
            set_error("null pointer");
            return OtbStatus::NullPointer;
        }
        let env = &(*env).inner;
        *out_k = env.mu().len();
        *out_kp = env.nu().len();
        OtbStatus::Ok
    })
}

/// Instance hash (hex, NUL-terminated) into a caller buffer of length `cap`.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn otb_env_hash(
    env: *const OtbEnv,
    buf: *mut c_char,
    cap: usize,
) -> OtbStatus {
    guard(|| {
        if env.is_null() || buf.is_null() {
            set_error("null pointer");
            return OtbStatus::NullPointer;
        }
        let hex = (*env).inner.hash_hex();
        let bytes = hex.as_bytes();
        if cap < bytes.len() + 1 {
            set_error(format!("buffer too small: need {}", bytes.len() + 1));
            return OtbStatus::InvalidArgument;
        }
        std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, bytes.len());
        *buf.add(bytes.len()) = 0;
        OtbStatus::Ok
    })
}

/// Lipschitz constant of the environment's true cost on its grid.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn otb_env_lipschitz(env: *const OtbEnv, out: *mut f64) -> OtbStatus {
    guard(|| {
        if env.is_null() || out.is_null() {
            set_error("null pointer");
            return OtbStatus::NullPointer;
        }
        *out = (*env).inner.lipschitz();
        OtbStatus::Ok
    })
}

/// Exact Kantorovich value of a `k x kp` cost table (row-major) under the
/// marginal weights `mu` (length `k`) and `nu` (length `kp`). Optionally
/// writes the optimal plan into `out_plan` (length `k*kp`).
///
/// # Safety
/// Array pointers must reference buffers of the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn otb_kantorovich(
    cost: *const f64,
    k: usize,
    kp: usize,
    mu: *const f64,
    nu: *const f64,
    out_value: *mut f64,
    out_plan: *mut f64,
) -> OtbStatus {
    guard(|| {
        if out_value.is_null() {
            set_error("null output pointer");
            return OtbStatus::NullPointer;
        }
        let (cost, mu, nu) = match (
            read_slice(cost, k * kp),
            read_slice(mu, k),
            read_slice(nu, kp),
        ) {
            (Ok(c), Ok(m), Ok(n)) => (c, m, n),
            (Err(s), _, _) | (_, Err(s), _) | (_, _, Err(s)) => return s,
        };
        let table = match Table::from_vec(k, kp, cost.to_vec()) {
            Ok(t) => t,
            Err(e) => {
                set_error(e.to_string());
                return OtbStatus::InvalidArgument;
            }
        };
        let cost = match CostTable::new(table) {
            Ok(c) => c,
            Err(e) => {
                set_error(e.to_string());
                return OtbStatus::InvalidArgument;
            }
        };
        let (mu, nu) = match (measure_from_weights(mu), measure_from_weights(nu)) {
            (Ok(m), Ok(n)) => (m, n),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        match kantorovich_exact(&cost, &mu, &nu) {
            Ok(baseline) => {
                *out_value = baseline.value;
                if !out_plan.is_null() {
                    let plan = baseline.optimizer.mass().as_slice();
                    std::ptr::copy_nonoverlapping(plan.as_ptr(), out_plan, plan.len());
                }
                OtbStatus::Ok
            }
            Err(e) => {
                set_error(e.to_string());
                OtbStatus::Solver
            }
        }
    })
}

/// Entropic solve at level `epsilon` with marginal-violation tolerance `tol`
/// and iteration budget `max_iter`. Fills the rounded feasible plan
/// (`out_plan`, length `k*kp`, optional), the certified primal value and the
/// duality gap. Returns `Unconverged` when the budget was hit; outputs are
/// still the flagged result.
///
/// # Safety
/// Array pointers must reference buffers of the stated lengths.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn otb_sinkhorn(
    cost: *const f64,
    k: usize,
    kp: usize,
    mu: *const f64,
    nu: *const f64,
    epsilon: f64,
    tol: f64,
    max_iter: usize,
    out_plan: *mut f64,
    out_value: *mut f64,
    out_gap: *mut f64,
    out_iterations: *mut usize,
) -> OtbStatus {
    guard(|| {
        if out_value.is_null() || out_gap.is_null() {
            set_error("null output pointer");
            return OtbStatus::NullPointer;
        }
        let (cost, mu, nu) = match (
            read_slice(cost, k * kp),
            read_slice(mu, k),
            read_slice(nu, kp),
        ) {
            (Ok(c), Ok(m), Ok(n)) => (c, m, n),
            (Err(s), _, _) | (_, Err(s), _) | (_, _, Err(s)) => return s,
        };
        let table = match Table::from_vec(k, kp, cost.to_vec()) {
            Ok(t) => t,
            Err(e) => {
                set_error(e.to_string());
                return OtbStatus::InvalidArgument;
            }
        };
        let cost = match CostTable::new(table) {
            Ok(c) => c,
            Err(e) => {
                set_error(e.to_string());
                return OtbStatus::InvalidArgument;
            }
        };
        let (mu, nu) = match (measure_from_weights(mu), measure_from_weights(nu)) {
            (Ok(m), Ok(n)) => (m, n),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        let opts = SinkhornOptions { tol, max_iter, ..SinkhornOptions::default() };
        match sinkhorn_allow_unconverged(&cost, &mu, &nu, epsilon, &opts) {
            Ok(res) => {
                *out_value = res.primal_value;
                *out_gap = res.gap;
                if !out_iterations.is_null() {
                    *out_iterations = res.iterations;
                }
                if !out_plan.is_null() {
                    let plan = res.plan.mass().as_slice();
                    std::ptr::copy_nonoverlapping(plan.as_ptr(), out_plan, plan.len());
                }
                if res.converged {
                    OtbStatus::Ok
                } else {
                    set_error(format!(
                        "stopped with marginal violation {:.3e}",
                        res.violation
                    ));
                    OtbStatus::Unconverged
                }
            }
            Err(e) => {
                set_error(e.to_string());
                OtbStatus::Solver
            }
        }
    })
}

/// Run a full experiment config (JSON) and return the export envelope as a
/// JSON string (records plus metadata). Free the result with
/// [`otb_string_free`]. Null on failure.
///
/// # Safety
/// `json` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn otb_run_experiment_json(json: *const c_char) -> *mut c_char {
    let result = catch_unwind(AssertUnwindSafe(|| {
        let text = match read_str(json) {
            Ok(t) => t,
            Err(_) => return None,
        };
        let cfg = match ExperimentConfig::from_json(text) {
            Ok(c) => c,
            Err(e) => {
                set_error(e.to_string());
                return None;
            }
        };
        let env = match cfg.env.build() {
            Ok(e) => e,
            Err(e) => {
                set_error(e.to_string());
                return None;
            }
        };
        let records = match run_experiment_on(&env, &cfg) {
            Ok(r) => r,
            Err(e) => {
                set_error(e.to_string());
                return None;
            }
        };
        let env = envelope(&cfg, records);
        match serde_json::to_string(&env) {
            Ok(s) => CString::new(s).ok(),
            Err(e) => {
                set_error(format!("serialize: {e}"));
                None
            }
        }
    }));
    match result {
        Ok(Some(cstr)) => cstr.into_raw(),
        Ok(None) => std::ptr::null_mut(),
        Err(_) => {
            set_error("internal panic");
            std::ptr::null_mut()
        }
    }
}

/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn otb_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
