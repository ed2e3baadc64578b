//! C interface to the `oscint` integrators.
//!
//! Every function returns an [`OscintStatus`]; on failure the message is
//! kept per thread and read with [`oscint_last_error_message`]. Handles
//! are opaque and must be released with [`oscint_integrator_free`].

use std::cell::RefCell;
use std::ffi::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};

use oscint::experiments::{IntegratorKind, SystemKind};
use oscint::simulation::Simulation;
use oscint::Error;

pub const OSCINT_SYSTEM_FPU: u32 = 0;
pub const OSCINT_SYSTEM_QUARTIC3: u32 = 1;
pub const OSCINT_SYSTEM_QUARTIC4: u32 = 2;
pub const OSCINT_SYSTEM_PENDULUM: u32 = 3;

pub const OSCINT_INTEGRATOR_HJ: u32 = 0;
pub const OSCINT_INTEGRATOR_HJ_NOLOOP: u32 = 1;
pub const OSCINT_INTEGRATOR_HJ_SYMMETRIC: u32 = 2;
pub const OSCINT_INTEGRATOR_VERLET: u32 = 3;
pub const OSCINT_INTEGRATOR_IMPULSE: u32 = 4;
pub const OSCINT_INTEGRATOR_MOLLIFY: u32 = 5;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OscintStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    BufferTooSmall = 3,
    NoConvergence = 4,
    NonFinite = 5,
    FrequencyFloor = 6,
    Domain = 7,
    Io = 8,
    Panic = 9,
}

/// Opaque integrator handle.
pub struct OscintIntegrator {
    sim: Simulation,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &Error) -> OscintStatus {
    match err.root() {
        Error::InvalidArgument(_) => OscintStatus::InvalidArgument,
        Error::NoConvergence { .. } => OscintStatus::NoConvergence,
        Error::NonFinite(_) => OscintStatus::NonFinite,
        Error::FrequencyFloor { .. } => OscintStatus::FrequencyFloor,
        Error::Domain(_) => OscintStatus::Domain,
        Error::Io(_) => OscintStatus::Io,
        Error::StepFailed { .. } => unreachable!("root strips step wrappers"),
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (OscintStatus, String)>) -> OscintStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => OscintStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            OscintStatus::Panic
        }
    }
}

fn fail(err: Error) -> (OscintStatus, String) {
    (status_of(&err), err.to_string())
}

fn null(what: &str) -> (OscintStatus, String) {
    (OscintStatus::NullPointer, format!("{what} is null"))
}

fn handle<'a>(ptr: *const OscintIntegrator) -> Result<&'a OscintIntegrator, (OscintStatus, String)> {
    // SAFETY: non-null handles come from `oscint_integrator_new`.
    unsafe { ptr.as_ref() }.ok_or_else(|| null("integrator"))
}

fn handle_mut<'a>(ptr: *mut OscintIntegrator) -> Result<&'a mut OscintIntegrator, (OscintStatus, String)> {
    // SAFETY: as above; the caller must not share the handle across threads.
    unsafe { ptr.as_mut() }.ok_or_else(|| null("integrator"))
}

fn write_out<T>(out: *mut T, value: T) -> Result<(), (OscintStatus, String)> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    // SAFETY: checked non-null; the caller provides writable storage.
    unsafe { out.write(value) };
    Ok(())
}

fn copy_out(values: &[f64], buf: *mut f64, len: usize) -> Result<(), (OscintStatus, String)> {
    if buf.is_null() {
        return Err(null("buffer"));
    }
    if len < values.len() {
        return Err((OscintStatus::BufferTooSmall, format!("buffer holds {len} values, need {}", values.len())));
    }
    // SAFETY: `buf` is non-null with room for at least `values.len()` doubles.
    unsafe { std::ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len()) };
    Ok(())
}

fn system_kind(code: u32) -> Result<SystemKind, (OscintStatus, String)> {
    Ok(match code {
        OSCINT_SYSTEM_FPU => SystemKind::Fpu,
        OSCINT_SYSTEM_QUARTIC3 => SystemKind::Quartic3,
        OSCINT_SYSTEM_QUARTIC4 => SystemKind::Quartic4,
        OSCINT_SYSTEM_PENDULUM => SystemKind::Pendulum,
        other => return Err((OscintStatus::InvalidArgument, format!("unknown system code {other}"))),
    })
}

fn integrator_kind(code: u32) -> Result<IntegratorKind, (OscintStatus, String)> {
    Ok(match code {
        OSCINT_INTEGRATOR_HJ => IntegratorKind::Hj,
        OSCINT_INTEGRATOR_HJ_NOLOOP => IntegratorKind::HjNoloop,
        OSCINT_INTEGRATOR_HJ_SYMMETRIC => IntegratorKind::HjSymmetric,
        OSCINT_INTEGRATOR_VERLET => IntegratorKind::Verlet,
        OSCINT_INTEGRATOR_IMPULSE => IntegratorKind::Impulse,
        OSCINT_INTEGRATOR_MOLLIFY => IntegratorKind::Mollify,
        other => return Err((OscintStatus::InvalidArgument, format!("unknown integrator code {other}"))),
    })
}

/// Creates an integrator at the system's default initial condition.
///
/// # Safety
/// `out` must point to writable storage for one handle pointer.
#[no_mangle]
pub unsafe extern "C" fn oscint_integrator_new(
    system: u32,
    integrator: u32,
    eps: f64,
    h: f64,
    out: *mut *mut OscintIntegrator,
) -> OscintStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("output pointer"));
        }
        let sim = Simulation::new(system_kind(system)?, integrator_kind(integrator)?, eps, h).map_err(fail)?;
        write_out(out, Box::into_raw(Box::new(OscintIntegrator { sim })))
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `ptr` must come from `oscint_integrator_new` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn oscint_integrator_free(ptr: *mut OscintIntegrator) {
    if !ptr.is_null() {
        drop(Box::from_raw(ptr));
    }
}

/// Sets the inner step of the Impulse and Mollify baselines.
///
/// # Safety
/// `ptr` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn oscint_integrator_set_inner_dt(ptr: *mut OscintIntegrator, inner_dt: f64) -> OscintStatus {
    guard(|| handle_mut(ptr)?.sim.set_inner_dt(inner_dt).map_err(fail))
}

/// Number of doubles in a state vector.
///
/// # Safety
/// `ptr` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn oscint_integrator_dim(ptr: *const OscintIntegrator, out: *mut usize) -> OscintStatus {
    guard(|| write_out(out, handle(ptr)?.sim.dim()))
}

/// Copies the state, `(q1, q2, p1, p2)` or `(a, r, p_a, p_r)`, into `buf`.
///
/// # Safety
/// `ptr` must be a live handle and `buf` valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn oscint_integrator_get_state(
    ptr: *const OscintIntegrator,
    buf: *mut f64,
    len: usize,
) -> OscintStatus {
    guard(|| copy_out(&handle(ptr)?.sim.state().map_err(fail)?, buf, len))
}

/// Replaces the state.
///
/// # Safety
/// `ptr` must be a live handle and `buf` valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn oscint_integrator_set_state(
    ptr: *mut OscintIntegrator,
    buf: *const f64,
    len: usize,
) -> OscintStatus {
    guard(|| {
        let it = handle_mut(ptr)?;
        if buf.is_null() {
            return Err(null("buffer"));
        }
        let z = std::slice::from_raw_parts(buf, len);
        it.sim.set_state(z).map_err(fail)
    })
}

/// Advances `n` steps; on failure the state is left at the last good step.
///
/// # Safety
/// `ptr` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn oscint_integrator_step(ptr: *mut OscintIntegrator, n: u64) -> OscintStatus {
    guard(|| handle_mut(ptr)?.sim.step(n).map_err(fail))
}

/// Number of observables written by `oscint_integrator_observables`.
///
/// # Safety
/// `ptr` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn oscint_integrator_observable_count(
    ptr: *const OscintIntegrator,
    out: *mut usize,
) -> OscintStatus {
    guard(|| write_out(out, handle(ptr)?.sim.observable_names().len()))
}

/// Energy, invariants and actions, in the CLI drift column order.
///
/// # Safety
/// `ptr` must be a live handle and `buf` valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn oscint_integrator_observables(
    ptr: *const OscintIntegrator,
    buf: *mut f64,
    len: usize,
) -> OscintStatus {
    guard(|| copy_out(&handle(ptr)?.sim.observables().map_err(fail)?, buf, len))
}

/// # Safety
/// `ptr` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn oscint_integrator_time(ptr: *const OscintIntegrator, out: *mut f64) -> OscintStatus {
    guard(|| write_out(out, handle(ptr)?.sim.time()))
}

/// Slow-force evaluations so far.
///
/// # Safety
/// `ptr` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn oscint_integrator_slow_gradient_calls(
    ptr: *const OscintIntegrator,
    out: *mut u64,
) -> OscintStatus {
    guard(|| write_out(out, handle(ptr)?.sim.slow_gradient_calls()))
}

/// Copies the calling thread's last error message, NUL-terminated and
/// truncated to `len` bytes. Returns the full message length without the
/// terminator, so a too-small buffer can be retried.
///
/// # Safety
/// `buf` must be valid for `len` bytes, or null with `len == 0`.
#[no_mangle]
pub unsafe extern "C" fn oscint_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}
