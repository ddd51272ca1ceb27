//! C interface to the CHNS solver.
//!
//! A simulation lives behind an opaque `ChnsSim` pointer created by
//! `chns_sim_new` and released with `chns_sim_free`. Every fallible call
//! returns a `ChnsStatus`; the message of the most recent failure on the
//! calling thread is available from `chns_last_error`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use chns_core::cli::random_phase;
use chns_core::discrete_ops::total_energy;
use chns_core::grid::mean_c;
use chns_core::scheme::{SchemeParams, SimState, SourceTerms, Stepper};
use chns_core::{BcMode, ChnsError, Field, MacVelocity};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChnsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    OutOfBounds = 3,
    NoConvergence = 4,
    InvariantBreach = 5,
    Io = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChnsBoundary {
    /// No-flux scalars, free-slip walls.
    Physical = 0,
    Periodic = 1,
}

/// Physical and numerical parameters. Solver tolerances keep their defaults.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChnsParams {
    pub n: usize,
    pub boundary: ChnsBoundary,
    pub eps: f64,
    pub theta0: f64,
    pub gamma: f64,
    pub nu: f64,
    pub tau: f64,
}

impl From<&SchemeParams> for ChnsParams {
    fn from(p: &SchemeParams) -> Self {
        ChnsParams {
            n: p.n,
            boundary: match p.bc {
                BcMode::PhysicalNeumannFreeSlip => ChnsBoundary::Physical,
                BcMode::Periodic => ChnsBoundary::Periodic,
            },
            eps: p.eps,
            theta0: p.theta0,
            gamma: p.gamma,
            nu: p.nu,
            tau: p.tau,
        }
    }
}

impl From<&ChnsParams> for SchemeParams {
    fn from(p: &ChnsParams) -> Self {
        SchemeParams {
            n: p.n,
            bc: match p.boundary {
                ChnsBoundary::Physical => BcMode::PhysicalNeumannFreeSlip,
                ChnsBoundary::Periodic => BcMode::Periodic,
            },
            eps: p.eps,
            theta0: p.theta0,
            gamma: p.gamma,
            nu: p.nu,
            tau: p.tau,
            ..SchemeParams::default()
        }
    }
}

/// Opaque simulation handle.
pub struct ChnsSim {
    stepper: Stepper,
    state: SimState,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &ChnsError) -> ChnsStatus {
    match e {
        ChnsError::OutOfBounds { .. } | ChnsError::PositivityBreach { .. } | ChnsError::Domain { .. } => {
            ChnsStatus::OutOfBounds
        }
        ChnsError::NoConvergence(_)
        | ChnsError::Breakdown(_)
        | ChnsError::LinearSolve { .. }
        | ChnsError::NewtonFailure { .. }
        | ChnsError::OuterNoConvergence { .. } => ChnsStatus::NoConvergence,
        ChnsError::InvariantBreach { .. } => ChnsStatus::InvariantBreach,
        ChnsError::Io(_) | ChnsError::Checkpoint(_) => ChnsStatus::Io,
        _ => ChnsStatus::InvalidArgument,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (ChnsStatus, String)>) -> ChnsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ChnsStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_error(format!("panic: {msg}"));
            ChnsStatus::Panic
        }
    }
}

fn core(e: ChnsError) -> (ChnsStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(name: &str) -> (ChnsStatus, String) {
    (ChnsStatus::NullPointer, format!("{name} is null"))
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn chns_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Writes the default parameters into `out`.
///
/// # Safety
/// `out` must be null or point to writable memory for one `ChnsParams`.
#[no_mangle]
pub unsafe extern "C" fn chns_params_default(out: *mut ChnsParams) -> ChnsStatus {
    guard(|| {
        let out = unsafe { out.as_mut() }.ok_or_else(|| null("out"))?;
        *out = ChnsParams::from(&SchemeParams::default());
        Ok(())
    })
}

unsafe fn build(
    params: *const ChnsParams,
    phi0: impl FnOnce(usize) -> Result<Field, (ChnsStatus, String)>,
    out: *mut *mut ChnsSim,
) -> ChnsStatus {
    guard(|| {
        let params = unsafe { params.as_ref() }.ok_or_else(|| null("params"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let prm = SchemeParams::from(params);
        prm.validate().map_err(core)?;
        let phi = phi0(prm.n)?;
        let stepper = Stepper::new(prm.clone()).map_err(core)?;
        let state = stepper
            .init_history(&phi, &MacVelocity::zeros(prm.n), &SourceTerms::none())
            .map_err(core)?;
        let sim = Box::new(ChnsSim { stepper, state });
        unsafe { *out = Box::into_raw(sim) };
        Ok(())
    })
}

/// Creates a simulation from a seeded random phase `beta0 + amplitude*U(-1,1)`
/// and zero velocity.
///
/// # Safety
/// `params` must point to a valid `ChnsParams`; `out` to writable storage
/// for one pointer.
#[no_mangle]
pub unsafe extern "C" fn chns_sim_new(
    params: *const ChnsParams,
    beta0: f64,
    amplitude: f64,
    seed: u64,
    out: *mut *mut ChnsSim,
) -> ChnsStatus {
    unsafe {
        build(
            params,
            |n| {
                if beta0.abs() > 0.5 || !(0.0..=0.05).contains(&amplitude) {
                    return Err((
                        ChnsStatus::InvalidArgument,
                        "need |beta0| <= 0.5 and amplitude in [0, 0.05]".to_string(),
                    ));
                }
                Ok(random_phase(n, beta0, amplitude, seed))
            },
            out,
        )
    }
}

/// Creates a simulation from `n*n` cell values of the phase, `i` fastest.
///
/// # Safety
/// `phi` must point to `len` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn chns_sim_new_from_phase(
    params: *const ChnsParams,
    phi: *const f64,
    len: usize,
    out: *mut *mut ChnsSim,
) -> ChnsStatus {
    unsafe {
        build(
            params,
            |n| {
                if phi.is_null() {
                    return Err(null("phi"));
                }
                if len != n * n {
                    return Err((
                        ChnsStatus::InvalidArgument,
                        format!("expected {} values, got {len}", n * n),
                    ));
                }
                let values = std::slice::from_raw_parts(phi, len);
                Ok(Field::from_cell_values(n, values))
            },
            out,
        )
    }
}

/// Releases a simulation. Null is ignored.
///
/// # Safety
/// `sim` must come from `chns_sim_new*` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn chns_sim_free(sim: *mut ChnsSim) {
    if !sim.is_null() {
        drop(unsafe { Box::from_raw(sim) });
    }
}

/// Advances `steps` time steps. On failure the state is left at the last
/// accepted step.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn chns_sim_step(sim: *mut ChnsSim, steps: usize) -> ChnsStatus {
    guard(|| {
        let sim = unsafe { sim.as_mut() }.ok_or_else(|| null("sim"))?;
        for _ in 0..steps {
            let (next, _) = sim.stepper.step(&sim.state, &SourceTerms::none()).map_err(core)?;
            sim.state = next;
        }
        Ok(())
    })
}

/// Grid size `n`, or 0 for a null handle.
///
/// # Safety
/// `sim` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn chns_sim_n(sim: *const ChnsSim) -> usize {
    unsafe { sim.as_ref() }.map_or(0, |s| s.state.n())
}

/// Simulated time, or NaN for a null handle.
///
/// # Safety
/// `sim` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn chns_sim_time(sim: *const ChnsSim) -> f64 {
    unsafe { sim.as_ref() }.map_or(f64::NAN, |s| s.state.time)
}

unsafe fn copy_cells(
    sim: *const ChnsSim,
    buf: *mut f64,
    len: usize,
    pick: impl Fn(&SimState, isize, isize) -> f64,
) -> ChnsStatus {
    guard(|| {
        let sim = unsafe { sim.as_ref() }.ok_or_else(|| null("sim"))?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let n = sim.state.n();
        if len != n * n {
            return Err((
                ChnsStatus::InvalidArgument,
                format!("buffer holds {len}, need {}", n * n),
            ));
        }
        let out = unsafe { std::slice::from_raw_parts_mut(buf, len) };
        for j in 0..n {
            for i in 0..n {
                out[j * n + i] = pick(&sim.state, i as isize, j as isize);
            }
        }
        Ok(())
    })
}

/// Copies the phase at cell centres into `buf` (`n*n`, `i` fastest).
///
/// # Safety
/// `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn chns_sim_get_phase(sim: *const ChnsSim, buf: *mut f64, len: usize) -> ChnsStatus {
    unsafe { copy_cells(sim, buf, len, |s, i, j| s.phi.get(i, j)) }
}

/// Copies the pressure at cell centres into `buf` (`n*n`, `i` fastest).
///
/// # Safety
/// `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn chns_sim_get_pressure(sim: *const ChnsSim, buf: *mut f64, len: usize) -> ChnsStatus {
    unsafe { copy_cells(sim, buf, len, |s, i, j| s.p.get(i, j)) }
}

/// Copies the velocity averaged to cell centres into `ux` and `uy`
/// (`n*n` each, `i` fastest).
///
/// # Safety
/// `ux` and `uy` must each point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn chns_sim_get_velocity(
    sim: *const ChnsSim,
    ux: *mut f64,
    uy: *mut f64,
    len: usize,
) -> ChnsStatus {
    let st = unsafe { copy_cells(sim, ux, len, |s, i, j| 0.5 * (s.u.x.get(i, j) + s.u.x.get(i + 1, j))) };
    if st != ChnsStatus::Ok {
        return st;
    }
    unsafe { copy_cells(sim, uy, len, |s, i, j| 0.5 * (s.u.y.get(i, j) + s.u.y.get(i, j + 1))) }
}

/// Total discrete energy of the current state.
///
/// # Safety
/// `sim` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn chns_sim_energy(sim: *const ChnsSim, out: *mut f64) -> ChnsStatus {
    guard(|| {
        let sim = unsafe { sim.as_ref() }.ok_or_else(|| null("sim"))?;
        let out = unsafe { out.as_mut() }.ok_or_else(|| null("out"))?;
        let p = sim.stepper.params();
        *out = total_energy(&sim.state.phi, &sim.state.u, p.eps, p.theta0, p.gamma, p.bc).map_err(core)?;
        Ok(())
    })
}

/// Mean of the phase over the cells.
///
/// # Safety
/// `sim` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn chns_sim_mass(sim: *const ChnsSim, out: *mut f64) -> ChnsStatus {
    guard(|| {
        let sim = unsafe { sim.as_ref() }.ok_or_else(|| null("sim"))?;
        let out = unsafe { out.as_mut() }.ok_or_else(|| null("out"))?;
        *out = mean_c(&sim.state.phi);
        Ok(())
    })
}
