//! Closed-form evolution of the normal parabolic equation, blow-up
//! detection, an independent time-stepping oracle, and the phase-space
//! classification into the stability / explosion / growing sets.
//!
//! The exact solution is y(t) = S(t; w0) / D(t) with the denominator
//! D(t) = 1 - int_0^t Phi(S(tau; w0)) dtau; blow-up is D crossing zero.

use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::functionals::{integrate_phi_segment, phi, PhiTrace, QuadratureSpec};
use serde::{Deserialize, Serialize};

/// Denominator threshold treated as a blow-up crossing.
pub const EPS_DENOMINATOR: f64 = 1e-8;

/// Relative width to which the blow-up time is bisection-refined.
const BLOWUP_REL_WIDTH: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TrajectoryStatus {
    Completed,
    /// Finite-time blow-up at the carried time.
    BlowUp(f64),
    QuadratureFailure,
}

/// Sampled norm history of one solution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// |y(t)|_0 at each recorded time.
    pub norm0: Vec<f64>,
    /// Denominator D(t); NaN for the time-stepping oracle, which does not
    /// track the closed-form denominator.
    pub denominator: Vec<f64>,
    pub status: TrajectoryStatus,
    /// Realized decay factor sup_t |y(t)|_0 e^t / |y(0)|_0.
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Stability,
    Explosion,
    Growing,
    Undetermined,
}

/// Classification of an initial datum with the evidence behind it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Classification {
    pub verdict: Verdict,
    /// Supremum of the cumulative Phi-trace over the quadrature horizon.
    pub sup_trace: f64,
    /// Where the supremum is attained.
    pub argmax_time: f64,
    /// Whether the maximum is interior (finite-time) rather than still
    /// climbing at the horizon.
    pub attained: bool,
    pub tail_bound: f64,
    pub tolerance: f64,
}

fn heat_norm0(omega0: &SpectralField, t: f64) -> f64 {
    let lat = omega0.lattice();
    let mut sum = 0.0;
    for (idx, kv) in lat.wavevectors().enumerate() {
        if kv == [0, 0, 0] {
            continue;
        }
        let k2 = (kv[0] * kv[0] + kv[1] * kv[1] + kv[2] * kv[2]) as f64;
        let decay = (-2.0 * k2 * t).exp();
        let c = &omega0.coeffs()[3 * idx..3 * idx + 3];
        sum += decay * (c[0].norm_sqr() + c[1].norm_sqr() + c[2].norm_sqr());
    }
    (crate::field::TORUS_VOLUME * sum).sqrt()
}

/// Locate the blow-up time: first crossing of D = 1 - I below
/// `EPS_DENOMINATOR` on the cached trace, bisection-refined with fresh
/// quadrature to relative width 1e-6.
fn refine_blowup(omega0: &SpectralField, trace: &PhiTrace, q: &QuadratureSpec) -> Result<f64> {
    let times = trace.times();
    let cum = trace.cumulative();
    let mut cross = None;
    for i in 1..times.len() {
        if 1.0 - cum[i] <= EPS_DENOMINATOR {
            cross = Some(i);
            break;
        }
    }
    let i = cross.ok_or_else(|| {
        Error::Quadrature("refine_blowup called without a denominator crossing".into())
    })?;
    let mut lo = times[i - 1];
    let mut hi = times[i];
    let mut integral_lo = cum[i - 1];
    // tolerance relative to the integrand scale (Phi is degree-1
    // homogeneous, so large data inflate everything proportionally)
    let scale = trace
        .phi_values()
        .iter()
        .fold(0.0_f64, |m, &v| m.max(v.abs()))
        .max(1.0);
    let seg_tol = q.tail_tolerance * scale;
    while hi - lo > BLOWUP_REL_WIDTH * hi.max(BLOWUP_REL_WIDTH) {
        let mid = 0.5 * (lo + hi);
        let integral_mid = integral_lo + integrate_phi_segment(omega0, lo, mid, seg_tol)?;
        if 1.0 - integral_mid <= EPS_DENOMINATOR {
            hi = mid;
        } else {
            lo = mid;
            integral_lo = integral_mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Exact solution S(t; w0) / D(t) at a single time.
///
/// Fails with `Error::BlowUp` carrying the bracketing interval when the
/// denominator has crossed by time `t`.
pub fn npe_solution_at(
    omega0: &SpectralField,
    t: f64,
    q: &QuadratureSpec,
) -> Result<SpectralField> {
    if t < 0.0 {
        return Err(Error::Domain(format!(
            "npe_solution_at needs t >= 0, got {t}"
        )));
    }
    let trace = PhiTrace::compute(omega0, q, &[t])?;
    let denom = 1.0 - trace.integral_at(t);
    if denom <= EPS_DENOMINATOR {
        let t_star = refine_blowup(omega0, &trace, q)?;
        let half_width = BLOWUP_REL_WIDTH * t_star;
        return Err(Error::BlowUp {
            lo: t_star - half_width,
            hi: t_star + half_width,
        });
    }
    Ok(omega0.heat_propagate(t)?.scaled(1.0 / denom))
}

/// Sample the exact solution on a time grid.
///
/// Norms are |S(t)|_0 / |D(t)| while the denominator stays clear of zero;
/// on a crossing the trajectory is truncated with a refined blow-up time.
pub fn simulate(omega0: &SpectralField, grid: &[f64], q: &QuadratureSpec) -> Result<Trajectory> {
    if grid.is_empty() || grid[0] < 0.0 || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(
            "simulation grid must be increasing and start at t >= 0".into(),
        ));
    }
    let trace = PhiTrace::compute(omega0, q, grid)?;
    let norm_in = omega0.norm0();
    let mut times = Vec::with_capacity(grid.len());
    let mut norms = Vec::with_capacity(grid.len());
    let mut denoms = Vec::with_capacity(grid.len());
    let mut status = TrajectoryStatus::Completed;
    let mut alpha = 0.0_f64;
    for &t in grid {
        let denom = 1.0 - trace.integral_at(t);
        if denom <= EPS_DENOMINATOR {
            let t_star = refine_blowup(omega0, &trace, q)?;
            status = TrajectoryStatus::BlowUp(t_star);
            break;
        }
        let n = heat_norm0(omega0, t) / denom.abs();
        times.push(t);
        norms.push(n);
        denoms.push(denom);
        if norm_in > 0.0 {
            alpha = alpha.max(n * t.exp() / norm_in);
        }
    }
    Ok(Trajectory {
        times,
        norm0: norms,
        denominator: denoms,
        status,
        alpha,
    })
}

/// Independent time-stepping oracle for the dynamics
/// dy/dt = Laplace y + Phi(y) y.
///
/// Operator splitting with both sub-flows exact: the Laplacian is applied
/// through its integrating factor e^{-|k|^2 h} and the nonlinear part
/// dy/dt = Phi(y) y through its closed-form flow y -> y / (1 - h Phi(y))
/// (Phi is degree-1 homogeneous, so the sub-flow reduces to a scalar
/// Riccati step with a fresh Phi evaluation). Strang composition gives
/// second order; adjacent half-steps of the nonlinear flow compose
/// exactly, so interior steps need one Phi evaluation each.
pub fn timestep_oracle(omega0: &SpectralField, dt: f64, t_end: f64) -> Result<Trajectory> {
    if dt <= 0.0 || t_end <= 0.0 {
        return Err(Error::Domain(format!(
            "timestep_oracle needs dt > 0 and T > 0, got dt = {dt}, T = {t_end}"
        )));
    }
    let steps = (t_end / dt).round().max(1.0) as usize;
    let sample_stride = (steps / 50).max(1);

    let norm_in = omega0.norm0();
    let mut times = vec![0.0];
    let mut norms = vec![norm_in];
    let mut denoms = vec![f64::NAN];
    let mut status = TrajectoryStatus::Completed;
    let mut alpha: f64 = if norm_in > 0.0 { 1.0 } else { 0.0 };

    // One closed segment per sample stride: N(h/2) (L(h) N(h))^{m-1} L(h) N(h/2).
    let mut y = omega0.clone();
    let mut step = 0usize;
    'outer: while step < steps {
        let seg = sample_stride.min(steps - step);
        let mut state = match nonlinear_flow(&y, dt / 2.0)? {
            Some(s) => s,
            None => {
                status = TrajectoryStatus::BlowUp(step as f64 * dt);
                break 'outer;
            }
        };
        for i in 0..seg {
            state = state.heat_propagate(dt)?;
            let h = if i + 1 == seg { dt / 2.0 } else { dt };
            state = match nonlinear_flow(&state, h)? {
                Some(s) => s,
                None => {
                    status = TrajectoryStatus::BlowUp((step + i + 1) as f64 * dt);
                    break 'outer;
                }
            };
        }
        step += seg;
        y = state;
        let t = step as f64 * dt;
        let n = y.norm0();
        times.push(t);
        norms.push(n);
        denoms.push(f64::NAN);
        if norm_in > 0.0 {
            alpha = alpha.max(n * t.exp() / norm_in);
        }
    }
    Ok(Trajectory {
        times,
        norm0: norms,
        denominator: denoms,
        status,
        alpha,
    })
}

/// Exact flow of dy/dt = Phi(y) y over step h: y / (1 - h Phi(y)).
/// Returns None when the amplification would exceed 10x (near blow-up).
fn nonlinear_flow(y: &SpectralField, h: f64) -> Result<Option<SpectralField>> {
    let p = phi(y)?;
    let denom = 1.0 - h * p;
    if denom.abs() < 0.1 {
        return Ok(None);
    }
    Ok(Some(y.scaled(1.0 / denom)))
}

/// Classify an initial datum by the supremum of its cumulative Phi-trace:
/// crossing 1 at finite time means explosion, staying clearly below means
/// exponential stability, and approaching 1 only at the horizon with a
/// still-climbing maximum is the growing regime. The boundary cannot be
/// decided numerically and is reported as undetermined inside the margin.
pub fn classify(omega0: &SpectralField, q: &QuadratureSpec, tol: f64) -> Result<Classification> {
    if omega0.norm0() == 0.0 {
        return Err(Error::Domain("classify requires a nonzero datum".into()));
    }
    let trace = PhiTrace::compute(omega0, q, &[])?;
    let (sup, t_at, idx) = trace.max_cumulative();
    let at_horizon = idx + 1 == trace.times().len();
    let tail = trace.tail_bound();
    let attained = !(at_horizon && tail > 1e-6);
    let verdict = if sup >= 1.0 + tol {
        Verdict::Explosion
    } else if sup + tail <= 1.0 - tol {
        Verdict::Stability
    } else if !attained && sup >= 1.0 - tol {
        Verdict::Growing
    } else {
        Verdict::Undetermined
    };
    Ok(Classification {
        verdict,
        sup_trace: sup,
        argmax_time: t_at,
        attained,
        tail_bound: tail,
        tolerance: tol,
    })
}

/// Small-ball radius r0 = 1 / (2 c1) inside which every datum is stable.
pub fn small_ball_radius(c1: f64) -> Result<f64> {
    if c1 <= 0.0 {
        return Err(Error::Domain(format!(
            "small_ball_radius needs c1 > 0, got {c1}"
        )));
    }
    Ok(1.0 / (2.0 * c1))
}
