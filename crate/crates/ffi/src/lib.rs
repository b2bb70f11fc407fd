//! C ABI over `npe-core`.
//!
//! Conventions: every object is an opaque handle allocated by this
//! library and released with the matching `_free` function; every
//! fallible call returns an [`NpeStatus`] and writes its result through
//! an out pointer, which is left untouched on failure. The last error
//! message is kept per thread and readable with
//! [`npe_last_error_message`]. All functions catch panics and report
//! them as `NPE_STATUS_PANIC` instead of unwinding across the ABI.

use npe_core::control::{
    build_control_u, control_trace_integral, synthesize, translate_support, ControlParams,
    StabilizationPlan, SupportBox, SynthesisOptions, FALLBACK_AMPLITUDES,
};
use npe_core::dynamics::{classify, simulate, TrajectoryStatus, Verdict};
use npe_core::estimate::random_divfree_field;
use npe_core::functionals::{phi, psi, QuadratureSpec};
use npe_core::{Error, LatticeSpec, SpectralField};
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

/// Status codes shared with the `npe` CLI exit codes (0, 2..=7), plus
/// ABI-level failures in the 100 range.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NpeStatus {
    Ok = 0,
    Config = 2,
    Invariant = 3,
    Certification = 4,
    BlowUp = 5,
    Quadrature = 6,
    Envelope = 7,
    NullPointer = 100,
    InvalidString = 101,
    Panic = 102,
}

/// Verdict codes returned by [`npe_classify`].
pub const NPE_VERDICT_STABILITY: i32 = 0;
/// The datum blows up in finite time.
pub const NPE_VERDICT_EXPLOSION: i32 = 1;
/// The datum grows without a detected finite-time crossing.
pub const NPE_VERDICT_GROWING: i32 = 2;
/// The datum sits inside the numerical tolerance band.
pub const NPE_VERDICT_UNDETERMINED: i32 = 3;

/// A divergence-free vector field on the lattice (opaque).
pub struct NpeField {
    inner: SpectralField,
}

/// A synthesized stabilization plan together with its control and the
/// controlled datum (opaque).
pub struct NpePlan {
    plan: StabilizationPlan,
    stabilized: SpectralField,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let sanitized: Vec<u8> = msg.bytes().filter(|&b| b != 0).collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &Error) -> NpeStatus {
    match err.exit_code() {
        2 => NpeStatus::Config,
        4 => NpeStatus::Certification,
        5 => NpeStatus::BlowUp,
        6 => NpeStatus::Quadrature,
        7 => NpeStatus::Envelope,
        _ => NpeStatus::Invariant,
    }
}

/// Run a fallible body, translating errors and panics into statuses.
fn guarded(body: impl FnOnce() -> Result<NpeStatus, Error>) -> NpeStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(status)) => status,
        Ok(Err(err)) => {
            set_error(&err.to_string());
            status_of(&err)
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic in npe-ffi".into());
            set_error(&msg);
            NpeStatus::Panic
        }
    }
}

unsafe fn path_arg<'a>(ptr: *const c_char) -> Result<&'a Path, NpeStatus> {
    if ptr.is_null() {
        set_error("null path");
        return Err(NpeStatus::NullPointer);
    }
    match CStr::from_ptr(ptr).to_str() {
        Ok(s) => Ok(Path::new(s)),
        Err(_) => {
            set_error("path is not valid UTF-8");
            Err(NpeStatus::InvalidString)
        }
    }
}

macro_rules! require {
    ($ptr:expr) => {
        if $ptr.is_null() {
            set_error(concat!("null pointer argument: ", stringify!($ptr)));
            return NpeStatus::NullPointer;
        }
    };
}

/// Message of the most recent failure on this thread. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn npe_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Release a field handle. Passing NULL is a no-op.
#[no_mangle]
pub extern "C" fn npe_field_free(field: *mut NpeField) {
    if !field.is_null() {
        drop(unsafe { Box::from_raw(field) });
    }
}

/// Release a plan handle. Passing NULL is a no-op.
#[no_mangle]
pub extern "C" fn npe_plan_free(plan: *mut NpePlan) {
    if !plan.is_null() {
        drop(unsafe { Box::from_raw(plan) });
    }
}

/// Seeded random smooth divergence-free field with unit L2 norm on the
/// N^3 grid with spectral cutoff K (N even, N >= 3K + 1).
#[no_mangle]
pub unsafe extern "C" fn npe_field_random(
    n: usize,
    k: usize,
    seed: u64,
    decay: f64,
    out: *mut *mut NpeField,
) -> NpeStatus {
    require!(out);
    guarded(|| {
        let lattice = LatticeSpec::new(n, k)?;
        let inner = random_divfree_field(lattice, seed, decay);
        *out = Box::into_raw(Box::new(NpeField { inner }));
        Ok(NpeStatus::Ok)
    })
}

/// The certified starting control u with |u|_0 = 1, supported on the
/// whole torus, with generator amplitudes (a0, a1, a2).
#[no_mangle]
pub unsafe extern "C" fn npe_control_build(
    n: usize,
    k: usize,
    a0: f64,
    a1: f64,
    a2: f64,
    out: *mut *mut NpeField,
) -> NpeStatus {
    require!(out);
    guarded(|| {
        let lattice = LatticeSpec::new(n, k)?;
        let params = ControlParams {
            support: SupportBox::default_box(),
            p: 1,
            amplitudes: [a0, a1, a2],
        };
        let (centered, _) = build_control_u(&params, lattice)?;
        let inner = translate_support(&centered, &params.support);
        *out = Box::into_raw(Box::new(NpeField { inner }));
        Ok(NpeStatus::Ok)
    })
}

/// Load a field from a file written by npe_field_write or the CLI.
#[no_mangle]
pub unsafe extern "C" fn npe_field_read(path: *const c_char, out: *mut *mut NpeField) -> NpeStatus {
    require!(out);
    let path = match path_arg(path) {
        Ok(p) => p,
        Err(status) => return status,
    };
    guarded(|| {
        let inner = npe_core::io::read_field(path)?;
        *out = Box::into_raw(Box::new(NpeField { inner }));
        Ok(NpeStatus::Ok)
    })
}

/// Write a field to a file (atomically: temp file + rename).
#[no_mangle]
pub unsafe extern "C" fn npe_field_write(field: *const NpeField, path: *const c_char) -> NpeStatus {
    require!(field);
    let path = match path_arg(path) {
        Ok(p) => p,
        Err(status) => return status,
    };
    let field = &*field;
    guarded(|| {
        npe_core::io::write_field(path, &field.inner)?;
        Ok(NpeStatus::Ok)
    })
}

/// Lattice parameters of a field.
#[no_mangle]
pub unsafe extern "C" fn npe_field_lattice(
    field: *const NpeField,
    n_out: *mut usize,
    k_out: *mut usize,
) -> NpeStatus {
    require!(field);
    require!(n_out);
    require!(k_out);
    let lattice = (*field).inner.lattice();
    *n_out = lattice.n;
    *k_out = lattice.k;
    NpeStatus::Ok
}

/// y = c * field, as a new handle.
#[no_mangle]
pub unsafe extern "C" fn npe_field_scaled(
    field: *const NpeField,
    c: f64,
    out: *mut *mut NpeField,
) -> NpeStatus {
    require!(field);
    require!(out);
    let field = &*field;
    guarded(|| {
        *out = Box::into_raw(Box::new(NpeField {
            inner: field.inner.scaled(c),
        }));
        Ok(NpeStatus::Ok)
    })
}

/// L2 norm (with the (2 pi)^3 volume factor).
#[no_mangle]
pub unsafe extern "C" fn npe_field_norm0(field: *const NpeField, out: *mut f64) -> NpeStatus {
    require!(field);
    require!(out);
    *out = (*field).inner.norm0();
    NpeStatus::Ok
}

/// The cubic functional Psi.
#[no_mangle]
pub unsafe extern "C" fn npe_psi(field: *const NpeField, out: *mut f64) -> NpeStatus {
    require!(field);
    require!(out);
    let field = &*field;
    guarded(|| {
        *out = psi(&field.inner)?;
        Ok(NpeStatus::Ok)
    })
}

/// Phi = Psi / |.|_0^2.
#[no_mangle]
pub unsafe extern "C" fn npe_phi(field: *const NpeField, out: *mut f64) -> NpeStatus {
    require!(field);
    require!(out);
    let field = &*field;
    guarded(|| {
        *out = phi(&field.inner)?;
        Ok(NpeStatus::Ok)
    })
}

/// Total Phi-trace integral of the heat flow of the field over the
/// default quadrature horizon (for the unit control this is g_inf, whose
/// reciprocal is the blow-up threshold).
#[no_mangle]
pub unsafe extern "C" fn npe_trace_integral(field: *const NpeField, out: *mut f64) -> NpeStatus {
    require!(field);
    require!(out);
    let field = &*field;
    guarded(|| {
        *out = control_trace_integral(&field.inner, &QuadratureSpec::default())?;
        Ok(NpeStatus::Ok)
    })
}

/// Sample |y(t)|_0 of the closed-form solution at `len` increasing times.
///
/// On a finite-time blow-up the return status is BlowUp, the refined
/// blow-up time is written to `blowup_time_out` (NAN otherwise) and the
/// norms past the crossing are NAN.
#[no_mangle]
pub unsafe extern "C" fn npe_simulate(
    field: *const NpeField,
    times: *const f64,
    len: usize,
    norms_out: *mut f64,
    blowup_time_out: *mut f64,
) -> NpeStatus {
    require!(field);
    require!(times);
    require!(norms_out);
    require!(blowup_time_out);
    let field = &*field;
    let grid = std::slice::from_raw_parts(times, len);
    let norms = std::slice::from_raw_parts_mut(norms_out, len);
    guarded(|| {
        let horizon = grid.last().copied().unwrap_or(0.0) + 1.0;
        let q = QuadratureSpec {
            t_max: horizon.max(QuadratureSpec::default().t_max),
            ..QuadratureSpec::default()
        };
        let traj = simulate(&field.inner, grid, &q)?;
        for (i, slot) in norms.iter_mut().enumerate() {
            *slot = traj.norm0.get(i).copied().unwrap_or(f64::NAN);
        }
        match traj.status {
            TrajectoryStatus::Completed => {
                *blowup_time_out = f64::NAN;
                Ok(NpeStatus::Ok)
            }
            TrajectoryStatus::BlowUp(t) => {
                *blowup_time_out = t;
                set_error("finite-time blow-up");
                Ok(NpeStatus::BlowUp)
            }
            TrajectoryStatus::QuadratureFailure => {
                set_error("quadrature did not converge");
                Ok(NpeStatus::Quadrature)
            }
        }
    })
}

/// Classify the datum; writes one of the NPE_VERDICT_* codes.
#[no_mangle]
pub unsafe extern "C" fn npe_classify(
    field: *const NpeField,
    tolerance: f64,
    verdict_out: *mut i32,
) -> NpeStatus {
    require!(field);
    require!(verdict_out);
    let field = &*field;
    guarded(|| {
        let cls = classify(&field.inner, &QuadratureSpec::default(), tolerance)?;
        *verdict_out = match cls.verdict {
            Verdict::Stability => NPE_VERDICT_STABILITY,
            Verdict::Explosion => NPE_VERDICT_EXPLOSION,
            Verdict::Growing => NPE_VERDICT_GROWING,
            Verdict::Undetermined => NPE_VERDICT_UNDETERMINED,
        };
        Ok(NpeStatus::Ok)
    })
}

/// Synthesize a starting control for the datum: certify the control,
/// estimate the constants and select lambda. The plan owns both the
/// control u and the stabilized datum v = y0 - lambda u.
#[no_mangle]
pub unsafe extern "C" fn npe_synthesize(y0: *const NpeField, out: *mut *mut NpePlan) -> NpeStatus {
    require!(y0);
    require!(out);
    let y0 = &*y0;
    guarded(|| {
        let lattice = y0.inner.lattice();
        let opts = SynthesisOptions {
            amplitudes: FALLBACK_AMPLITUDES,
            ..SynthesisOptions::default()
        };
        let (plan, stabilized) = synthesize(&y0.inner, &SupportBox::default_box(), lattice, &opts)?;
        *out = Box::into_raw(Box::new(NpePlan { plan, stabilized }));
        Ok(NpeStatus::Ok)
    })
}

/// Selected control amplitude lambda (0 for already-stable data).
#[no_mangle]
pub unsafe extern "C" fn npe_plan_lambda(plan: *const NpePlan, out: *mut f64) -> NpeStatus {
    require!(plan);
    require!(out);
    *out = (*plan).plan.lambda;
    NpeStatus::Ok
}

/// Certified decay constant beta-hat of the control.
#[no_mangle]
pub unsafe extern "C" fn npe_plan_beta_hat(plan: *const NpePlan, out: *mut f64) -> NpeStatus {
    require!(plan);
    require!(out);
    *out = (*plan).plan.beta_hat;
    NpeStatus::Ok
}

/// Stabilization horizon T; |y(T)|_0 is inside the small ball.
#[no_mangle]
pub unsafe extern "C" fn npe_plan_horizon(plan: *const NpePlan, out: *mut f64) -> NpeStatus {
    require!(plan);
    require!(out);
    *out = (*plan).plan.horizon_t;
    NpeStatus::Ok
}

/// Small-ball radius r0 = 1 / (2 c1).
#[no_mangle]
pub unsafe extern "C" fn npe_plan_small_ball_radius(
    plan: *const NpePlan,
    out: *mut f64,
) -> NpeStatus {
    require!(plan);
    require!(out);
    *out = (*plan).plan.r0;
    NpeStatus::Ok
}

/// Copy of the certified unit-norm control u.
#[no_mangle]
pub unsafe extern "C" fn npe_plan_control(
    plan: *const NpePlan,
    out: *mut *mut NpeField,
) -> NpeStatus {
    require!(plan);
    require!(out);
    let plan = &*plan;
    guarded(|| {
        *out = Box::into_raw(Box::new(NpeField {
            inner: plan.plan.u.clone(),
        }));
        Ok(NpeStatus::Ok)
    })
}

/// Copy of the stabilized datum v = y0 - lambda u.
#[no_mangle]
pub unsafe extern "C" fn npe_plan_stabilized_datum(
    plan: *const NpePlan,
    out: *mut *mut NpeField,
) -> NpeStatus {
    require!(plan);
    require!(out);
    let plan = &*plan;
    guarded(|| {
        *out = Box::into_raw(Box::new(NpeField {
            inner: plan.stabilized.clone(),
        }));
        Ok(NpeStatus::Ok)
    })
}
