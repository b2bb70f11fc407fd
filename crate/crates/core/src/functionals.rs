//! The nonlinearity machinery of the normal parabolic equation: the
//! trilinear form Psi, the normalizing functional Phi = Psi / |.|_0^2, the
//! time integral of Phi along the heat flow (the blow-up denominator), the
//! B-decomposition diagnostic and the phase-space functions b(v), Gamma(v).

use crate::error::{Error, Result};
use crate::field::{synth_pair, PhysicalField, SpectralField, TORUS_VOLUME};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Tolerance on the relative divergence defect accepted by the trilinear
/// form (sampled truncations of analytically divergence-free fields are
/// not exactly solenoidal).
const EPS_DIVFREE: f64 = 1e-8;

/// Graded-mesh quadrature parameters for the Phi time integral.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Initial time step of the graded mesh.
    pub initial_step: f64,
    /// Geometric step growth factor, > 1.
    pub growth: f64,
    /// Quadrature horizon; the tail beyond it is bounded, not integrated.
    pub t_max: f64,
    /// Absolute error target for the cumulative integral.
    pub tail_tolerance: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            initial_step: 1e-3,
            growth: 1.05,
            t_max: 30.0,
            tail_tolerance: 1e-9,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.initial_step <= 0.0
            || self.growth <= 1.0
            || self.t_max <= 0.0
            || self.tail_tolerance <= 0.0
        {
            return Err(Error::Config(format!("invalid quadrature spec: {self:?}")));
        }
        Ok(())
    }
}

fn component_coeffs(f: &SpectralField, comp: usize) -> Vec<Complex64> {
    f.coeffs().iter().skip(comp).step_by(3).copied().collect()
}

/// Trilinear form Psi(y1, y2, y3) = int ((y1, grad) curl^{-1} y2, y3) dx.
///
/// The gradient of w = curl^{-1} y2 is evaluated spectrally and the triple
/// product contracted on the grid, which is exact for N >= 3K + 1.
pub fn psi3(y1: &SpectralField, y2: &SpectralField, y3: &SpectralField) -> Result<f64> {
    let lat = y1.lattice();
    if y2.lattice() != lat || y3.lattice() != lat {
        return Err(Error::LatticeMismatch(
            format!("{:?}", lat),
            format!("{:?}/{:?}", y2.lattice(), y3.lattice()),
        ));
    }
    let div = y2.divergence_defect();
    if div > EPS_DIVFREE {
        return Err(Error::Invariant(format!(
            "psi3: y2 is not divergence-free (relative defect {div:e})"
        )));
    }
    let w = y2.curl_inv()?;

    // Scalars to synthesize: y1 (3), y3 (3), grad w (9).
    let mut scalars: Vec<Vec<Complex64>> = Vec::with_capacity(15);
    for c in 0..3 {
        scalars.push(component_coeffs(y1, c));
    }
    for c in 0..3 {
        scalars.push(component_coeffs(y3, c));
    }
    for j in 0..3 {
        for m in 0..3 {
            let mut g = component_coeffs(&w, m);
            for (idx, kv) in lat.wavevectors().enumerate() {
                g[idx] *= Complex64::new(0.0, kv[j] as f64);
            }
            scalars.push(g);
        }
    }

    let ng = lat.grid_count();
    let mut grids = vec![vec![0.0_f64; ng]; scalars.len()];
    let mut workspace = Vec::new();
    let mut i = 0;
    while i < scalars.len() {
        if i + 1 < scalars.len() {
            let (lo, hi) = grids.split_at_mut(i + 1);
            synth_pair(
                lat,
                &scalars[i],
                Some(&scalars[i + 1]),
                &mut lo[i],
                &mut hi[0],
                &mut workspace,
            );
            i += 2;
        } else {
            let mut dummy = Vec::new();
            synth_pair(
                lat,
                &scalars[i],
                None,
                &mut grids[i],
                &mut dummy,
                &mut workspace,
            );
            i += 1;
        }
    }

    let (a, rest) = grids.split_at(3);
    let (b, g) = rest.split_at(3);
    let mut sum = 0.0_f64;
    for p in 0..ng {
        let mut acc = 0.0;
        for j in 0..3 {
            for m in 0..3 {
                acc += a[j][p] * g[3 * j + m][p] * b[m][p];
            }
        }
        sum += acc;
    }
    Ok(sum * TORUS_VOLUME / ng as f64)
}

/// Cubic form Psi(y) = Psi(y, y, y).
///
/// Uses the symmetric-gradient reduction: the antisymmetric part of
/// grad curl^{-1} y drops out of the contraction y^T (grad w) y, so only
/// five independent strain components need synthesis (4 FFTs instead of 6).
pub fn psi(y: &SpectralField) -> Result<f64> {
    let lat = y.lattice();
    let div = y.divergence_defect();
    if div > EPS_DIVFREE {
        return Err(Error::Invariant(format!(
            "psi: field is not divergence-free (relative defect {div:e})"
        )));
    }
    let w = y.curl_inv()?;
    let wc: [Vec<Complex64>; 3] = [
        component_coeffs(&w, 0),
        component_coeffs(&w, 1),
        component_coeffs(&w, 2),
    ];
    let m = lat.mode_count();
    // S_jm = i (k_j w_m + k_m w_j) / 2, packed as S11, S22, S12, S13, S23.
    let pairs = [(0usize, 0usize), (1, 1), (0, 1), (0, 2), (1, 2)];
    let mut strain: Vec<Vec<Complex64>> = Vec::with_capacity(5);
    for &(j, mm) in &pairs {
        let mut s = vec![Complex64::default(); m];
        for (idx, kv) in lat.wavevectors().enumerate() {
            let v = wc[mm][idx] * kv[j] as f64 + wc[j][idx] * kv[mm] as f64;
            s[idx] = Complex64::new(0.0, 0.5) * v;
        }
        strain.push(s);
    }
    let yc: [Vec<Complex64>; 3] = [
        component_coeffs(y, 0),
        component_coeffs(y, 1),
        component_coeffs(y, 2),
    ];

    let ng = lat.grid_count();
    let mut g = vec![vec![0.0_f64; ng]; 8];
    let mut ws = Vec::new();
    {
        let (a, b) = g.split_at_mut(1);
        synth_pair(lat, &yc[0], Some(&yc[1]), &mut a[0], &mut b[0], &mut ws);
    }
    {
        let (a, b) = g.split_at_mut(3);
        synth_pair(lat, &yc[2], Some(&strain[0]), &mut a[2], &mut b[0], &mut ws);
    }
    {
        let (a, b) = g.split_at_mut(5);
        synth_pair(
            lat,
            &strain[1],
            Some(&strain[2]),
            &mut a[4],
            &mut b[0],
            &mut ws,
        );
    }
    {
        let (a, b) = g.split_at_mut(7);
        synth_pair(
            lat,
            &strain[3],
            Some(&strain[4]),
            &mut a[6],
            &mut b[0],
            &mut ws,
        );
    }

    let mut sum = 0.0_f64;
    for p in 0..ng {
        let (y1, y2, y3) = (g[0][p], g[1][p], g[2][p]);
        let (s11, s22, s12, s13, s23) = (g[3][p], g[4][p], g[5][p], g[6][p], g[7][p]);
        let s33 = -s11 - s22;
        sum += s11 * y1 * y1
            + s22 * y2 * y2
            + s33 * y3 * y3
            + 2.0 * (s12 * y1 * y2 + s13 * y1 * y3 + s23 * y2 * y3);
    }
    Ok(sum * TORUS_VOLUME / ng as f64)
}

/// Normalizing functional Phi(w) = Psi(w) / |w|_0^2, with Phi(0) = 0.
pub fn phi(omega: &SpectralField) -> Result<f64> {
    let n0 = omega.norm0();
    if n0 == 0.0 {
        return Ok(0.0);
    }
    Ok(psi(omega)? / (n0 * n0))
}

/// Sampled trace of tau -> Phi(S(tau; omega0)) with its cumulative
/// integral: the blow-up denominator is D(t) = 1 - integral.
#[derive(Debug, Clone)]
pub struct PhiTrace {
    times: Vec<f64>,
    phi_values: Vec<f64>,
    cumulative: Vec<f64>,
    tail_bound: f64,
    error_estimate: f64,
}

impl PhiTrace {
    /// Integrate Phi along the heat flow of `omega0` on a graded mesh from
    /// 0 to at least `q.t_max`, refining adaptively until the error
    /// estimate meets `q.tail_tolerance`. `extra_times` are inserted as
    /// mesh nodes so the cumulative integral is exact there.
    pub fn compute(
        omega0: &SpectralField,
        q: &QuadratureSpec,
        extra_times: &[f64],
    ) -> Result<PhiTrace> {
        q.validate()?;
        let mut horizon = q.t_max;
        for &t in extra_times {
            if t < 0.0 {
                return Err(Error::Domain(format!("negative time {t} in trace request")));
            }
            horizon = horizon.max(t);
        }

        // Graded node set plus the requested extras.
        let mut nodes = vec![0.0_f64];
        let mut t = 0.0;
        let mut h = q.initial_step;
        while t < horizon {
            t = (t + h).min(horizon);
            nodes.push(t);
            h *= q.growth;
        }
        for &t in extra_times {
            nodes.push(t);
        }
        nodes.sort_by(|a, b| a.partial_cmp(b).unwrap());
        nodes.dedup_by(|a, b| (*a - *b).abs() < 1e-14);

        let integrand = |tau: f64| -> Result<f64> { phi(&omega0.heat_propagate(tau)?) };

        let mut phi_values = Vec::with_capacity(nodes.len());
        for &t in &nodes {
            phi_values.push(integrand(t)?);
        }

        let total_len = *nodes.last().unwrap();
        // Phi is homogeneous of degree one in the datum, so tolerances must
        // follow the integrand scale or large-amplitude data force the
        // refinement to its depth limit everywhere.
        let scale = phi_values
            .iter()
            .fold(0.0_f64, |m, &v| m.max(v.abs()))
            .max(1.0);
        let mut cumulative = vec![0.0_f64; nodes.len()];
        let mut err_total = 0.0_f64;
        for i in 1..nodes.len() {
            let (a, b) = (nodes[i - 1], nodes[i]);
            let tol = q.tail_tolerance * scale * ((b - a) / total_len).max(1e-6);
            let (val, err) =
                adaptive_simpson(&integrand, a, phi_values[i - 1], b, phi_values[i], tol, 18)?;
            cumulative[i] = cumulative[i - 1] + val;
            err_total += err;
        }
        if err_total > 10.0 * q.tail_tolerance * scale {
            return Err(Error::Quadrature(format!(
                "Phi-trace refinement did not converge: error estimate {err_total:e} > {:e}",
                10.0 * q.tail_tolerance * scale
            )));
        }

        // |Phi(S(tau))| decays at least like e^{-(tau - horizon)} past the
        // horizon for mean-zero data, so |Phi(horizon)| bounds the tail.
        let tail_bound = phi_values.last().unwrap().abs();

        Ok(PhiTrace {
            times: nodes,
            phi_values,
            cumulative,
            tail_bound,
            error_estimate: err_total,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn phi_values(&self) -> &[f64] {
        &self.phi_values
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    pub fn error_estimate(&self) -> f64 {
        self.error_estimate
    }

    /// Cumulative integral at `t`. Exact at mesh nodes; between nodes a
    /// trapezoid on the linearly interpolated integrand is used, so pass
    /// accuracy-critical times as `extra_times` when computing the trace.
    pub fn integral_at(&self, t: f64) -> f64 {
        match self.times.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
            Ok(i) => self.cumulative[i],
            Err(0) => 0.0,
            Err(i) if i >= self.times.len() => *self.cumulative.last().unwrap(),
            Err(i) => {
                let (t0, t1) = (self.times[i - 1], self.times[i]);
                let (f0, f1) = (self.phi_values[i - 1], self.phi_values[i]);
                let s = (t - t0) / (t1 - t0);
                let ft = f0 + s * (f1 - f0);
                self.cumulative[i - 1] + (t - t0) * (f0 + ft) * 0.5
            }
        }
    }

    /// Largest cumulative value over the mesh (always >= 0: the t = 0 node
    /// contributes 0) with its location.
    pub fn max_cumulative(&self) -> (f64, f64, usize) {
        let mut best = 0;
        for i in 1..self.cumulative.len() {
            if self.cumulative[i] > self.cumulative[best] {
                best = i;
            }
        }
        (self.cumulative[best], self.times[best], best)
    }
}

#[allow(clippy::too_many_arguments)]
fn adaptive_simpson(
    f: &impl Fn(f64) -> Result<f64>,
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
    tol: f64,
    depth: usize,
) -> Result<(f64, f64)> {
    let m = 0.5 * (a + b);
    let fm = f(m)?;
    simpson_rec(
        f,
        a,
        fa,
        m,
        fm,
        b,
        fb,
        simpson(a, fa, m, fm, b, fb),
        tol,
        depth,
    )
}

fn simpson(a: f64, fa: f64, m: f64, fm: f64, b: f64, fb: f64) -> f64 {
    debug_assert!((m - 0.5 * (a + b)).abs() < 1e-12 * (1.0 + b.abs()));
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(
    f: &impl Fn(f64) -> Result<f64>,
    a: f64,
    fa: f64,
    m: f64,
    fm: f64,
    b: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: usize,
) -> Result<(f64, f64)> {
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm)?;
    let frm = f(rm)?;
    let left = simpson(a, fa, lm, flm, m, fm);
    let right = simpson(m, fm, rm, frm, b, fb);
    let err = (left + right - whole) / 15.0;
    if err.abs() <= tol || depth == 0 {
        return Ok((left + right + err, err.abs()));
    }
    let (lv, le) = simpson_rec(f, a, fa, lm, flm, m, fm, left, tol * 0.5, depth - 1)?;
    let (rv, re) = simpson_rec(f, m, fm, rm, frm, b, fb, right, tol * 0.5, depth - 1)?;
    Ok((lv + rv, le + re))
}

/// Fresh adaptive integration of Phi(S(tau; omega0)) over [a, b], used for
/// sub-node refinement (blow-up bracketing) without touching a cached trace.
pub fn integrate_phi_segment(omega0: &SpectralField, a: f64, b: f64, tol: f64) -> Result<f64> {
    if b <= a {
        return Ok(0.0);
    }
    let integrand = |tau: f64| -> Result<f64> { phi(&omega0.heat_propagate(tau)?) };
    let fa = integrand(a)?;
    let fb = integrand(b)?;
    let (val, _err) = adaptive_simpson(&integrand, a, fa, b, fb, tol, 18)?;
    Ok(val)
}

/// Time integral of Phi along the heat flow, int_0^t Phi(S(tau; omega0)) dtau,
/// with an a posteriori error estimate.
pub fn phi_time_integral(omega0: &SpectralField, t: f64, q: &QuadratureSpec) -> Result<(f64, f64)> {
    if t < 0.0 {
        return Err(Error::Domain(format!(
            "phi_time_integral needs t >= 0, got {t}"
        )));
    }
    let trace = PhiTrace::compute(omega0, q, &[t])?;
    Ok((trace.integral_at(t), trace.error_estimate()))
}

/// Helmholtz nonlinearity B(w) = (v, grad) w - (w, grad) v with
/// v = curl^{-1} w, split into the sphere-normal part B_n = -Phi(w) w
/// (so (B_n, w) = (B, w) = -Psi(w)) and the tangential remainder B_tau.
pub fn nonlinear_term(
    omega: &SpectralField,
) -> Result<(SpectralField, SpectralField, SpectralField)> {
    let lat = omega.lattice();
    let div = omega.divergence_defect();
    if div > EPS_DIVFREE {
        return Err(Error::Invariant(format!(
            "nonlinear_term: field is not divergence-free (relative defect {div:e})"
        )));
    }
    let v = omega.curl_inv()?;
    let vp = v.to_physical()?;
    let op = omega.to_physical()?;
    let mut d_omega = Vec::with_capacity(3);
    let mut d_v = Vec::with_capacity(3);
    for axis in 0..3 {
        d_omega.push(omega.partial_derivative(axis).to_physical()?);
        d_v.push(v.partial_derivative(axis).to_physical()?);
    }
    let ng = lat.grid_count();
    let mut samples = vec![0.0_f64; 3 * ng];
    for m in 0..3 {
        let dst = &mut samples[m * ng..(m + 1) * ng];
        for j in 0..3 {
            let vj = vp.component(j);
            let oj = op.component(j);
            let dom = d_omega[j].component(m);
            let dvm = d_v[j].component(m);
            for p in 0..ng {
                dst[p] += vj[p] * dom[p] - oj[p] * dvm[p];
            }
        }
    }
    let b = PhysicalField::new(lat, samples)?
        .to_spectral()
        .leray_project();
    // normal part of B: (B, w) w / |w|^2 = -Phi(w) w, since (B, w) = -Psi(w)
    let b_n = omega.scaled(-phi(omega)?);
    let b_tau = b.axpy(-1.0, &b_n)?;
    Ok((b, b_n, b_tau))
}

/// b(v) = max_{t in [0, T_max]} int_0^t Phi(S(tau; v)) dtau for unit v.
///
/// Returns the maximum, the time where it is attained and whether it is an
/// interior maximum (a horizon maximum with a non-negligible tail bound is
/// reported as not attained: candidate growing-set membership).
pub fn stability_function_b(v: &SpectralField, q: &QuadratureSpec) -> Result<(f64, f64, bool)> {
    let n0 = v.norm0();
    if (n0 - 1.0).abs() > 1e-10 {
        return Err(Error::Invariant(format!(
            "stability_function_b requires |v|_0 = 1, got {n0}"
        )));
    }
    let trace = PhiTrace::compute(v, q, &[])?;
    let (b, t_at, idx) = trace.max_cumulative();
    let at_horizon = idx + 1 == trace.times().len();
    let attained = !(at_horizon && trace.tail_bound() > 1e-6);
    Ok((b, t_at, attained))
}

/// Gamma(v) = v / b(v): the radial blow-up threshold map on the unit sphere.
pub fn gamma_map(v: &SpectralField, q: &QuadratureSpec) -> Result<SpectralField> {
    let (b, _, _) = stability_function_b(v, q)?;
    if b <= 0.0 {
        return Err(Error::Domain(format!(
            "gamma_map: b(v) = {b} is not positive (v is not in B+)"
        )));
    }
    Ok(v.scaled(1.0 / b))
}
