//! Construction of the compactly supported starting control u(x), the
//! numerical decay certificate Psi(S(t; u)) e^{18t} >= 3 beta > 0, the
//! lambda / t0 / horizon selection, and assembly of the stabilization plan
//! v = y0 - lambda u.

use crate::error::{Error, Result};
use crate::estimate::{estimate_trace_constant, estimate_trilinear_constant, SampledConstant};
use crate::field::{PhysicalField, SpectralField};
use crate::functionals::{psi, PhiTrace, QuadratureSpec};
use crate::lattice::LatticeSpec;
use serde::{Deserialize, Serialize};
use std::f64::consts::{E, PI};

/// Support parallelepiped [a1,b1] x [a2,b2] x [a3,b3] inside the torus.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SupportBox {
    pub a: [f64; 3],
    pub b: [f64; 3],
}

impl SupportBox {
    pub fn new(a: [f64; 3], b: [f64; 3]) -> Result<Self> {
        for i in 0..3 {
            if !(0.0 <= a[i] && a[i] < b[i] && b[i] <= 2.0 * PI) {
                return Err(Error::Config(format!(
                    "support box axis {i}: need 0 <= a < b <= 2pi, got [{}, {}]",
                    a[i], b[i]
                )));
            }
            let rho = 0.5 * (b[i] - a[i]);
            if !(rho > 0.0 && rho <= PI) {
                return Err(Error::Config(format!(
                    "support half-width {rho} on axis {i} outside (0, pi]"
                )));
            }
        }
        Ok(SupportBox { a, b })
    }

    /// Default: the full torus, half-widths pi, admitting the p = 1 control.
    pub fn default_box() -> Self {
        SupportBox {
            a: [0.0; 3],
            b: [2.0 * PI; 3],
        }
    }

    pub fn half_widths(&self) -> [f64; 3] {
        [
            0.5 * (self.b[0] - self.a[0]),
            0.5 * (self.b[1] - self.a[1]),
            0.5 * (self.b[2] - self.a[2]),
        ]
    }

    pub fn center(&self) -> [f64; 3] {
        [
            0.5 * (self.a[0] + self.b[0]),
            0.5 * (self.a[1] + self.b[1]),
            0.5 * (self.a[2] + self.b[2]),
        ]
    }

    pub fn min_half_width(&self) -> f64 {
        self.half_widths()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Parameters of the control: support box, lattice scale p, amplitudes.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ControlParams {
    pub support: SupportBox,
    pub p: u32,
    pub amplitudes: [f64; 3],
}

impl ControlParams {
    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(Error::Config("lattice scale p must be positive".into()));
        }
        let rho = self.support.min_half_width();
        if PI / self.p as f64 > rho + 1e-12 {
            return Err(Error::Config(format!(
                "pi/p = {} exceeds the smallest support half-width {rho}",
                PI / self.p as f64
            )));
        }
        Ok(())
    }
}

/// Minimal p with pi/p <= min half-width.
pub fn choose_p(support: &SupportBox) -> u32 {
    let ratio = PI / support.min_half_width();
    (ratio * (1.0 - 1e-9)).ceil().max(1.0) as u32
}

/// sin t + sin(2t)/2 and its derivatives.
fn s_factor(t: f64, order: u8) -> f64 {
    match order {
        0 => t.sin() + 0.5 * (2.0 * t).sin(),
        1 => t.cos() + (2.0 * t).cos(),
        2 => -t.sin() - 2.0 * (2.0 * t).sin(),
        _ => -t.cos() - 4.0 * (2.0 * t).cos(),
    }
}

/// 1 + cos t and its derivatives.
fn c_factor(t: f64, order: u8) -> f64 {
    match order {
        0 => 1.0 + t.cos(),
        1 => -t.sin(),
        2 => -t.cos(),
        _ => t.sin(),
    }
}

/// Partial derivative of the generator w at x, derivative order per axis.
///
/// w = sum over i < j, k != i,j of a_k (1 + cos x_k)
///     (sin x_i + sin(2x_i)/2)(sin x_j + sin(2x_j)/2)
pub fn w_partial(x: [f64; 3], orders: [u8; 3], amplitudes: [f64; 3]) -> f64 {
    const TRIPLES: [(usize, usize, usize); 3] = [(0, 1, 2), (0, 2, 1), (1, 2, 0)];
    let mut total = 0.0;
    for &(i, j, k) in &TRIPLES {
        total += amplitudes[k]
            * c_factor(x[k], orders[k])
            * s_factor(x[i], orders[i])
            * s_factor(x[j], orders[j]);
    }
    total
}

/// The generator w itself.
pub fn build_w(x: [f64; 3], amplitudes: [f64; 3]) -> f64 {
    w_partial(x, [0, 0, 0], amplitudes)
}

/// Vector integrand of the control before the support cutoff:
/// p^2 (-d22 w - d33 w, d12 w, d13 w) evaluated at p x.
fn control_components(x: [f64; 3], p: u32, amplitudes: [f64; 3]) -> [f64; 3] {
    let pf = p as f64;
    let px = [pf * x[0], pf * x[1], pf * x[2]];
    let p2 = pf * pf;
    [
        p2 * (-w_partial(px, [0, 2, 0], amplitudes) - w_partial(px, [0, 0, 2], amplitudes)),
        p2 * w_partial(px, [1, 1, 0], amplitudes),
        p2 * w_partial(px, [1, 0, 1], amplitudes),
    ]
}

/// Diagnostics recorded while sampling and truncating the control.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ControlDiagnostics {
    /// Relative divergence defect of the sampled field before projection.
    pub pre_projection_divergence: f64,
    /// Relative L2 energy lost to the mode cutoff.
    pub truncation_residual: f64,
    /// L2 norm of the truncated field before normalization.
    pub raw_norm: f64,
}

/// Build the control field, centered at the origin (support in
/// [-pi/p, pi/p]^3 on the wrapped torus), normalized to |u|_0 = 1.
///
/// The analytic field is divergence-free; its sampled truncation is not
/// exactly so and is Leray-projected before use. Use `translate_support`
/// to move the support into a caller's box.
pub fn build_control_u(
    params: &ControlParams,
    lattice: LatticeSpec,
) -> Result<(SpectralField, ControlDiagnostics)> {
    params.validate()?;
    let p = params.p;
    if lattice.k < 2 * p as usize {
        return Err(Error::Config(format!(
            "cutoff K = {} cannot resolve control scale p = {p}: need K >= 2p",
            lattice.k
        )));
    }
    let cutoff = PI / p as f64;
    let amps = params.amplitudes;
    let phys = PhysicalField::from_fn(lattice, |x| {
        // centered torus coordinate in (-pi, pi]
        let xc = [
            if x[0] > PI { x[0] - 2.0 * PI } else { x[0] },
            if x[1] > PI { x[1] - 2.0 * PI } else { x[1] },
            if x[2] > PI { x[2] - 2.0 * PI } else { x[2] },
        ];
        if xc.iter().any(|&c| c.abs() > cutoff) {
            return [0.0; 3];
        }
        control_components(xc, p, amps)
    });
    let grid_norm = phys.norm0_grid();
    if grid_norm == 0.0 {
        return Err(Error::Invariant(
            "degenerate control: sampled field is identically zero".into(),
        ));
    }
    let raw = phys.to_spectral();
    let pre_div = raw.divergence_defect();
    let spec_norm = raw.norm0();
    let truncation_residual =
        ((grid_norm * grid_norm - spec_norm * spec_norm).max(0.0)).sqrt() / grid_norm;
    let projected = raw.leray_project();
    let norm = projected.norm0();
    if norm == 0.0 {
        return Err(Error::Invariant(
            "degenerate control: zero norm after projection".into(),
        ));
    }
    Ok((
        projected.scaled(1.0 / norm),
        ControlDiagnostics {
            pre_projection_divergence: pre_div,
            truncation_residual,
            raw_norm: norm,
        },
    ))
}

/// Move a field supported in the centered box into the caller's box by
/// phase modulation e^{-i (k, c)}. Norm-preserving.
pub fn translate_support(field: &SpectralField, support: &SupportBox) -> SpectralField {
    field.translated(support.center())
}

/// One row of the decay certificate.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CertRow {
    pub t: f64,
    pub psi: f64,
    /// psi(S(t; u)) e^{18 t}
    pub ratio: f64,
}

/// Numerical certificate of Psi(S(t; u)) e^{18t} >= 3 beta > 0.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayCertificate {
    pub beta_hat: f64,
    pub min_ratio: f64,
    pub min_time: f64,
    pub rows: Vec<CertRow>,
}

/// Evaluate the certificate rows r(t) = Psi(S(t; u)) e^{18t} without
/// passing judgement; returns (rows, min ratio, argmin time).
pub fn decay_rows(u: &SpectralField, t_grid: &[f64]) -> Result<(Vec<CertRow>, f64, f64)> {
    if t_grid.is_empty() {
        return Err(Error::Config("certification grid is empty".into()));
    }
    let mut rows = Vec::with_capacity(t_grid.len());
    let mut min_ratio = f64::INFINITY;
    let mut min_time = 0.0;
    for &t in t_grid {
        if t < 0.0 {
            return Err(Error::Domain(format!("certification time {t} < 0")));
        }
        let s = u.heat_propagate(t)?;
        let p = psi(&s)?;
        let ratio = p * (18.0 * t).exp();
        if ratio < min_ratio {
            min_ratio = ratio;
            min_time = t;
        }
        rows.push(CertRow { t, psi: p, ratio });
    }
    Ok((rows, min_ratio, min_time))
}

/// Evaluate r(t) = Psi(S(t; u)) e^{18t} over the grid; beta = min r / 3.
/// Fails loudly (and early) as soon as a non-positive ratio appears.
pub fn certify_decay(u: &SpectralField, t_grid: &[f64]) -> Result<DecayCertificate> {
    if t_grid.is_empty() {
        return Err(Error::Config("certification grid is empty".into()));
    }
    let mut rows = Vec::with_capacity(t_grid.len());
    let mut min_ratio = f64::INFINITY;
    let mut min_time = 0.0;
    for &t in t_grid {
        if t < 0.0 {
            return Err(Error::Domain(format!("certification time {t} < 0")));
        }
        let s = u.heat_propagate(t)?;
        let p = psi(&s)?;
        let ratio = p * (18.0 * t).exp();
        if ratio <= 0.0 {
            return Err(Error::Certification(format!(
                "decay certificate failed: Psi(S(t;u)) e^(18t) = {ratio:e} at t = {t}"
            )));
        }
        if ratio < min_ratio {
            min_ratio = ratio;
            min_time = t;
        }
        rows.push(CertRow { t, psi: p, ratio });
    }
    Ok(DecayCertificate {
        beta_hat: min_ratio / 3.0,
        min_ratio,
        min_time,
        rows,
    })
}

/// 200 log-spaced points on [1e-4, t_end]: the default certification grid.
pub fn log_grid(points: usize, t_lo: f64, t_hi: f64) -> Vec<f64> {
    assert!(points >= 2 && t_lo > 0.0 && t_hi > t_lo);
    let l0 = t_lo.ln();
    let l1 = t_hi.ln();
    (0..points)
        .map(|i| (l0 + (l1 - l0) * i as f64 / (points - 1) as f64).exp())
        .collect()
}

/// t0 = 1 / (8 e |u|_inf^4): half the admissible upper bound, so the
/// strict inequality |u|_inf < A_{t0} e^{-t0} holds with margin.
pub fn choose_t0(u_inf: f64) -> Result<f64> {
    if u_inf <= 0.0 {
        return Err(Error::Domain(format!(
            "choose_t0 needs |u|_inf > 0, got {u_inf}"
        )));
    }
    Ok(1.0 / (8.0 * E * u_inf.powi(4)))
}

/// A_{t0} = e^{t0 - 1/4} / (sqrt(2) t0^{1/4}).
pub fn a_constant(t0: f64) -> f64 {
    (t0 - 0.25).exp() / (2.0_f64.sqrt() * t0.powf(0.25))
}

/// lambda_01 = (c e^{15T} / beta)(A^2 y + A y^2 + y^3), y = |y0|_{1/2}.
pub fn lambda_threshold_1(y0_half: f64, t_horizon: f64, beta: f64, c: f64, a: f64) -> f64 {
    c * (15.0 * t_horizon).exp() / beta
        * (a * a * y0_half + a * y0_half * y0_half + y0_half.powi(3))
}

/// lambda_02 = (c / beta)(A^2 y e^{16 t0} + A y^2 e^{17 t0} + y^3 e^{18 t0}).
pub fn lambda_threshold_2(y0_half: f64, t0: f64, beta: f64, c: f64, a: f64) -> f64 {
    c / beta
        * (a * a * y0_half * (16.0 * t0).exp()
            + a * y0_half * y0_half * (17.0 * t0).exp()
            + y0_half.powi(3) * (18.0 * t0).exp())
}

/// Root of F(x) = beta x^16 + 32 c1 x - beta on (0, 1) and the horizon
/// T = ln(1/x0). F(0) < 0 < F(1), F' > 0: bisection is safe.
pub fn stabilization_horizon(beta: f64, c1: f64) -> Result<(f64, f64)> {
    if beta <= 0.0 || c1 <= 0.0 {
        return Err(Error::Domain(format!(
            "stabilization_horizon needs beta, c1 > 0, got {beta}, {c1}"
        )));
    }
    let f = |x: f64| beta * x.powi(16) + 32.0 * c1 * x - beta;
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while hi - lo > 1e-14 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x0 = 0.5 * (lo + hi);
    Ok(((1.0 / x0).ln(), x0))
}

/// Sup-norm estimate of a field by sampling on a `refine`-times finer grid.
pub fn sup_norm_estimate(field: &SpectralField, refine: usize) -> Result<f64> {
    let lat = field.lattice();
    let fine = LatticeSpec::new(lat.n * refine.max(1), lat.k)?;
    let lifted = SpectralField::from_coeffs(fine, field.coeffs().to_vec())?;
    let phys = lifted.to_physical()?;
    let ng = fine.grid_count();
    let mut max = 0.0_f64;
    for p in 0..ng {
        let v = phys.component(0)[p].powi(2)
            + phys.component(1)[p].powi(2)
            + phys.component(2)[p].powi(2);
        max = max.max(v);
    }
    Ok(max.sqrt())
}

/// One row of the psi-bound verification.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PsiBoundRow {
    pub t: f64,
    /// -Psi(S(t; y0 - lambda u))
    pub neg_psi: f64,
    /// -Psi / |S|_0^3
    pub ratio: f64,
    /// the normalized threshold beta e^{-15t}
    pub threshold: f64,
    /// worst relative margin of the two inequalities at this t
    pub margin: f64,
}

/// Certificate for the two inequalities of the lambda selection:
/// -Psi(S(t; y0 - lambda u)) > 2 beta lambda^3 e^{-18t} and
/// -Psi / |S|_0^3 > beta e^{-15t}.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PsiBoundCertificate {
    pub pass: bool,
    pub worst_margin: f64,
    pub worst_time: f64,
    pub rows: Vec<PsiBoundRow>,
}

pub fn verify_psi_bound(
    y0: &SpectralField,
    lambda: f64,
    u: &SpectralField,
    t_grid: &[f64],
    beta_hat: f64,
) -> Result<PsiBoundCertificate> {
    let y0_norm = y0.norm0();
    if lambda <= 7.0 * y0_norm {
        return Err(Error::Domain(format!(
            "verify_psi_bound requires lambda > 7 |y0|_0 = {}, got {lambda}",
            7.0 * y0_norm
        )));
    }
    let v = y0.axpy(-lambda, u)?;
    let lam3 = lambda.powi(3);
    let mut rows = Vec::with_capacity(t_grid.len());
    let mut pass = true;
    let mut worst = f64::INFINITY;
    let mut worst_time = 0.0;
    for &t in t_grid {
        let s = v.heat_propagate(t)?;
        let neg_psi = -psi(&s)?;
        let thr_cubic = 2.0 * beta_hat * lam3 * (-18.0 * t).exp();
        let norm_s = s.norm0();
        let ratio = neg_psi / norm_s.powi(3);
        let thr_ratio = beta_hat * (-15.0 * t).exp();
        let m1 = (neg_psi - thr_cubic) / thr_cubic;
        let m2 = (ratio - thr_ratio) / thr_ratio;
        let margin = m1.min(m2);
        if margin < worst {
            worst = margin;
            worst_time = t;
        }
        if margin <= 0.0 {
            pass = false;
        }
        rows.push(PsiBoundRow {
            t,
            neg_psi,
            ratio,
            threshold: thr_ratio,
            margin,
        });
    }
    Ok(PsiBoundCertificate {
        pass,
        worst_margin: worst,
        worst_time,
        rows,
    })
}

/// Theoretical decay envelope of the controlled solution:
/// |v| e^{-t} / (1 + (beta/16) |v| (1 - e^{-16t})).
pub fn decay_envelope(t: f64, v_norm: f64, beta: f64) -> f64 {
    v_norm * (-t).exp() / (1.0 + beta / 16.0 * v_norm * (1.0 - (-16.0 * t).exp()))
}

/// Every constant of the stabilization construction, with provenance.
#[derive(Debug, Clone, Serialize)]
pub struct StabilizationPlan {
    /// The certified control, translated into the requested box, |u|_0 = 1.
    #[serde(skip)]
    pub u: SpectralField,
    pub support: SupportBox,
    pub p: u32,
    pub amplitudes: [f64; 3],
    /// Certified decay constant, min Psi(S(t;u)) e^{18t} / 3 over the grid.
    pub beta_hat: f64,
    /// Empirical trilinear inequality constant.
    pub c_hat: SampledConstant,
    /// Empirical trace inequality constant.
    pub c1_hat: SampledConstant,
    pub t0: f64,
    pub a_t0: f64,
    pub lambda01: f64,
    pub lambda02: f64,
    pub lambda: f64,
    pub lambda_escalations: u32,
    pub horizon_t: f64,
    pub root_x0: f64,
    pub r0: f64,
    pub u_inf: f64,
    pub u_inf_refinement: usize,
    pub y0_norm0: f64,
    pub y0_norm_half: f64,
    pub v_norm0: f64,
}

/// Tunables of `synthesize`.
#[derive(Debug, Clone)]
pub struct SynthesisOptions {
    pub quadrature: QuadratureSpec,
    pub seed: u64,
    pub amplitudes: [f64; 3],
    pub cert_points: usize,
    pub constant_samples: usize,
    pub max_escalations: u32,
}

/// Asymmetric amplitudes with a certified-positive decay ratio; also the
/// fallback family of the synthesis search.
pub const FALLBACK_AMPLITUDES: [f64; 3] = [1.0, 2.0, 3.0];

impl Default for SynthesisOptions {
    fn default() -> Self {
        SynthesisOptions {
            quadrature: QuadratureSpec::default(),
            seed: 0x5eed,
            amplitudes: FALLBACK_AMPLITUDES,
            cert_points: 200,
            constant_samples: 18,
            max_escalations: 20,
        }
    }
}

/// Full pipeline: build and certify u in the box, estimate the inequality
/// constants, select t0, T and lambda (analytic thresholds as a starting
/// point, geometric escalation gated by `verify_psi_bound`), and return
/// the plan together with v = y0 - lambda u.
pub fn synthesize(
    y0: &SpectralField,
    support: &SupportBox,
    lattice: LatticeSpec,
    opts: &SynthesisOptions,
) -> Result<(StabilizationPlan, SpectralField)> {
    let q = &opts.quadrature;
    let p = choose_p(support);
    let cert_grid = log_grid(opts.cert_points, 1e-4, 3.0);

    // Build and certify the control; if the requested amplitudes fail the
    // positivity certificate, search their sign patterns, then an
    // asymmetric fallback family. Symmetric amplitudes (a1 = a2 = a3) make
    // Psi vanish identically by permutation symmetry, so a sign search
    // alone cannot rescue them.
    let mut chosen: Option<(SpectralField, [f64; 3], DecayCertificate)> = None;
    let mut first_err = None;
    let mut patterns: Vec<[f64; 3]> = Vec::new();
    for base in [opts.amplitudes, FALLBACK_AMPLITUDES] {
        for signs in 0..8u32 {
            let mut a = base;
            for (i, amp) in a.iter_mut().enumerate() {
                if signs >> i & 1 == 1 {
                    *amp = -*amp;
                }
            }
            if !patterns.contains(&a) {
                patterns.push(a);
            }
        }
    }
    for amps in patterns {
        let params = ControlParams {
            support: *support,
            p,
            amplitudes: amps,
        };
        let (centered, _diag) = build_control_u(&params, lattice)?;
        let u = translate_support(&centered, support);
        match certify_decay(&u, &cert_grid) {
            Ok(cert) => {
                chosen = Some((u, amps, cert));
                break;
            }
            Err(e) => {
                if first_err.is_none() {
                    first_err = Some(e);
                }
            }
        }
    }
    let (u, amplitudes, cert) = chosen.ok_or_else(|| {
        first_err.unwrap_or_else(|| Error::Certification("no amplitude pattern certifies".into()))
    })?;
    let beta_hat = cert.beta_hat;

    let c_hat = estimate_trilinear_constant(lattice, opts.seed, opts.constant_samples)?;
    let c1_hat = estimate_trace_constant(
        lattice,
        q,
        opts.seed.wrapping_add(1000),
        opts.constant_samples,
    )?;
    let r0 = crate::dynamics::small_ball_radius(c1_hat.value)?;

    let u_inf_refinement = 2;
    let u_inf = sup_norm_estimate(&u, u_inf_refinement)?;
    let t0 = choose_t0(u_inf)?;
    let a_t0 = a_constant(t0);
    if u_inf >= a_t0 * (-t0).exp() {
        return Err(Error::Invariant(format!(
            "t0 selection violated |u|_inf < A e^(-t0): {u_inf} vs {}",
            a_t0 * (-t0).exp()
        )));
    }
    let (horizon_t, root_x0) = stabilization_horizon(beta_hat, c1_hat.value)?;

    let y0_norm0 = y0.norm0();
    let y0_norm_half = y0.sobolev_norm(0.5)?;

    // Data already in the stability set need no control.
    let already_stable = if y0_norm0 == 0.0 {
        false
    } else {
        crate::dynamics::classify(y0, q, 1e-3)?.verdict == crate::dynamics::Verdict::Stability
    };
    if already_stable {
        let plan = StabilizationPlan {
            u,
            support: *support,
            p,
            amplitudes,
            beta_hat,
            c_hat,
            c1_hat,
            t0,
            a_t0,
            lambda01: 0.0,
            lambda02: 0.0,
            lambda: 0.0,
            lambda_escalations: 0,
            horizon_t,
            root_x0,
            r0,
            u_inf,
            u_inf_refinement,
            y0_norm0,
            y0_norm_half,
            v_norm0: y0_norm0,
        };
        return Ok((plan, y0.clone()));
    }

    let lambda01 = lambda_threshold_1(y0_norm_half, horizon_t, beta_hat, c_hat.value, a_t0);
    let lambda02 = lambda_threshold_2(y0_norm_half, t0, beta_hat, c_hat.value, a_t0);
    let mut lambda = 1.1 * lambda01.max(lambda02).max(7.0 * y0_norm0).max(1.0);

    let verify_grid = log_grid(opts.cert_points, 1e-4, horizon_t.max(1e-3));
    let mut escalations = 0;
    loop {
        let cert = verify_psi_bound(y0, lambda, &u, &verify_grid, beta_hat)?;
        if cert.pass {
            break;
        }
        escalations += 1;
        if escalations > opts.max_escalations {
            return Err(Error::Certification(format!(
                "psi bound not certified after {escalations} lambda escalations \
                 (worst margin {:.3e} at t = {:.4})",
                cert.worst_margin, cert.worst_time
            )));
        }
        lambda *= 2.0;
    }

    let v = y0.axpy(-lambda, &u)?;
    let plan = StabilizationPlan {
        u,
        support: *support,
        p,
        amplitudes,
        beta_hat,
        c_hat,
        c1_hat,
        t0,
        a_t0,
        lambda01,
        lambda02,
        lambda,
        lambda_escalations: escalations,
        horizon_t,
        root_x0,
        r0,
        u_inf,
        u_inf_refinement,
        y0_norm0,
        y0_norm_half,
        v_norm0: v.norm0(),
    };
    Ok((plan, v))
}

/// Total Phi-trace integral of the control over the quadrature horizon,
/// g_inf = int_0^inf Phi(S(tau; u)) dtau (tail bounded); the blow-up
/// threshold amplitude is 1 / g_inf.
pub fn control_trace_integral(u: &SpectralField, q: &QuadratureSpec) -> Result<f64> {
    let trace = PhiTrace::compute(u, q, &[])?;
    Ok(*trace.cumulative().last().unwrap())
}
