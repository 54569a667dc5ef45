//! C interface to `dampwave`.
//!
//! Every function returns a [`DwStatus`]; on failure a message is available
//! through [`dw_last_error_message`] on the same thread. Trajectories are
//! opaque handles created by [`dw_trajectory_simulate`] and released with
//! [`dw_trajectory_free`]. The header is generated into `include/dampwave.h`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use dampwave::analysis::{fit_power_law, FitWindow};
use dampwave::evolve::{simulate, SimulationSetup, Trajectory, TrajectoryStatus};
use dampwave::exponents::{check_admissibility, critical_exponent, gamma_tilde, Scope, Setting};
use dampwave::spectral::propagator_entries;
use dampwave::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DwStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    OutOfScope = 3,
    Numerical = 4,
    Refused = 5,
    Io = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DwSettingKind {
    Euclidean = 0,
    Heisenberg = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DwPropagator {
    pub a: f64,
    pub b: f64,
    pub a_t: f64,
    pub b_t: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DwSample {
    pub t: f64,
    pub l2: f64,
    pub h1dot: f64,
    pub linf: f64,
    pub hneg: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DwRunStatus {
    /// 1 when the run crossed the blow-up threshold.
    pub blow_up: i32,
    /// Horizon reached, or the midpoint of the blow-up bracket.
    pub time: f64,
    pub bracket_lo: f64,
    pub bracket_hi: f64,
    pub under_resolved: i32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DwDecayFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub n_points: usize,
}

/// Opaque simulation result.
pub struct DwTrajectory {
    inner: Trajectory,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &Error) -> DwStatus {
    match err {
        Error::Numerical(_) => DwStatus::Numerical,
        Error::Refused(_) => DwStatus::Refused,
        Error::Io(_) | Error::Csv(_) => DwStatus::Io,
        _ => DwStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (DwStatus, String)>) -> DwStatus {
    set_error(String::new());
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DwStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            DwStatus::Panic
        }
    }
}

fn lift(err: Error) -> (DwStatus, String) {
    (status_of(&err), err.to_string())
}

fn null(what: &str) -> (DwStatus, String) {
    (DwStatus::NullPointer, format!("{what} is null"))
}

fn setting(kind: DwSettingKind, n: u32) -> Result<Setting, (DwStatus, String)> {
    match kind {
        DwSettingKind::Euclidean => Setting::euclidean(n),
        DwSettingKind::Heisenberg => Setting::heisenberg(n),
    }
    .map_err(lift)
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length plus one.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn dw_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        bytes.len() + 1
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dw_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Critical power `1 + 4/(d + 2γ)`, `d` the (homogeneous) dimension.
///
/// # Safety
/// `out_p` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dw_critical_exponent(kind: DwSettingKind, n: u32, gamma: f64, out_p: *mut f64) -> DwStatus {
    guard(|| {
        if out_p.is_null() {
            return Err(null("out_p"));
        }
        let p = critical_exponent(setting(kind, n)?, gamma).map_err(lift)?;
        *out_p = p;
        Ok(())
    })
}

/// Positive root of `2γ² + dγ − 2d = 0`.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dw_gamma_tilde(kind: DwSettingKind, n: u32, out: *mut f64) -> DwStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = gamma_tilde(setting(kind, n)?);
        Ok(())
    })
}

/// Writes 1 to `out_admissible` when `γ` is admissible, 0 otherwise.
/// Returns `OutOfScope` (and writes 0) when the setting is not covered at all.
///
/// # Safety
/// `out_admissible` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dw_check_admissibility(kind: DwSettingKind, n: u32, gamma: f64, out_admissible: *mut i32) -> DwStatus {
    guard(|| {
        if out_admissible.is_null() {
            return Err(null("out_admissible"));
        }
        let v = check_admissibility(setting(kind, n)?, gamma);
        *out_admissible = v.admissible as i32;
        if v.scope == Scope::OutsideTheoremScope {
            return Err((DwStatus::OutOfScope, format!("{} is outside theorem scope", v.setting)));
        }
        if !v.admissible {
            let conds: Vec<_> = v.violated_conditions.iter().map(|c| c.condition.as_str()).collect();
            set_error(conds.join("; "));
        }
        Ok(())
    })
}

/// Entries of the exact mode propagator of `w'' + w' + k²w = 0` at time `t`.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dw_propagator(t: f64, k2: f64, out: *mut DwPropagator) -> DwStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let e = propagator_entries(t, k2).map_err(lift)?;
        *out = DwPropagator { a: e.a, b: e.b, a_t: e.a_t, b_t: e.b_t };
        Ok(())
    })
}

/// Least-squares fit of `log y` against `log(1+t)` for `t_lo <= t <= t_hi`.
///
/// # Safety
/// `t` and `y` must point to `len` readable values; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dw_fit_decay(
    t: *const f64,
    y: *const f64,
    len: usize,
    t_lo: f64,
    t_hi: f64,
    out: *mut DwDecayFit,
) -> DwStatus {
    guard(|| {
        if t.is_null() || y.is_null() || out.is_null() {
            return Err(null("t, y or out"));
        }
        let t = std::slice::from_raw_parts(t, len);
        let y = std::slice::from_raw_parts(y, len);
        let fit = fit_power_law(t, y, FitWindow { t_lo, t_hi }).map_err(lift)?;
        *out = DwDecayFit { slope: fit.slope, intercept: fit.intercept, stderr: fit.stderr, n_points: fit.n_points };
        Ok(())
    })
}

/// Runs the simulation described by a JSON setup (the `simulation` section of a run config).
///
/// # Safety
/// `setup_json` must be a NUL-terminated string; `out` must be valid for writes.
/// The handle written to `out` must be released with [`dw_trajectory_free`].
#[no_mangle]
pub unsafe extern "C" fn dw_trajectory_simulate(setup_json: *const c_char, out: *mut *mut DwTrajectory) -> DwStatus {
    guard(|| {
        if setup_json.is_null() || out.is_null() {
            return Err(null("setup_json or out"));
        }
        *out = ptr::null_mut();
        let text = CStr::from_ptr(setup_json)
            .to_str()
            .map_err(|e| (DwStatus::InvalidArgument, format!("setup is not UTF-8: {e}")))?;
        let setup: SimulationSetup = serde_json::from_str(text).map_err(|e| lift(Error::Json(e)))?;
        let traj = simulate(&setup).map_err(lift)?;
        *out = Box::into_raw(Box::new(DwTrajectory { inner: traj }));
        Ok(())
    })
}

/// Number of recorded samples; 0 for a null handle.
///
/// # Safety
/// `h` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dw_trajectory_len(h: *const DwTrajectory) -> usize {
    h.as_ref().map_or(0, |h| h.inner.samples.len())
}

/// # Safety
/// `h` must be null or a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dw_trajectory_sample(h: *const DwTrajectory, index: usize, out: *mut DwSample) -> DwStatus {
    guard(|| {
        let (Some(h), false) = (h.as_ref(), out.is_null()) else {
            return Err(null("handle or out"));
        };
        let s = h.inner.samples.get(index).ok_or_else(|| {
            (DwStatus::InvalidArgument, format!("sample {index} out of range (len {})", h.inner.samples.len()))
        })?;
        *out = DwSample { t: s.t, l2: s.l2, h1dot: s.h1dot, linf: s.linf, hneg: s.hneg };
        Ok(())
    })
}

/// # Safety
/// `h` must be null or a live handle; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn dw_trajectory_status(h: *const DwTrajectory, out: *mut DwRunStatus) -> DwStatus {
    guard(|| {
        let (Some(h), false) = (h.as_ref(), out.is_null()) else {
            return Err(null("handle or out"));
        };
        let under_resolved = h.inner.under_resolved as i32;
        *out = match h.inner.status {
            TrajectoryStatus::ReachedHorizon { horizon } => {
                DwRunStatus { blow_up: 0, time: horizon, bracket_lo: horizon, bracket_hi: horizon, under_resolved }
            }
            TrajectoryStatus::BlowUp { t_life, bracket_lo, bracket_hi } => {
                DwRunStatus { blow_up: 1, time: t_life, bracket_lo, bracket_hi, under_resolved }
            }
        };
        Ok(())
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `h` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dw_trajectory_free(h: *mut DwTrajectory) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}
