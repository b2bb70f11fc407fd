//! Truncated-Fourier representation of real, mean-zero, divergence-free
//! 3-vector fields on the torus, with the exact linear calculus used
//! everywhere else: curl, curl^{-1}, Leray projection, Sobolev norms and
//! the heat semigroup.
//!
//! Norm convention: every `|.|_s` carries the (2pi)^3 volume factor so the
//! s = 0 norm coincides with the physical L2 integral.

use crate::error::{Error, Result};
use crate::fft::fft3_inplace;
use crate::lattice::LatticeSpec;
use num_complex::Complex64;

/// Volume of the torus, (2pi)^3.
pub const TORUS_VOLUME: f64 =
    8.0 * std::f64::consts::PI * std::f64::consts::PI * std::f64::consts::PI;

/// Relative tolerance on |k . c(k)| for the divergence-free invariant.
pub const EPS_DIV: f64 = 1e-10;

const EPS_HERMITIAN: f64 = 1e-10;
const EPS_REALNESS: f64 = 1e-12;

/// Complex Fourier coefficients of a 3-vector field, one 3-vector per
/// retained wavevector, lexicographic k order, interleaved components.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    lattice: LatticeSpec,
    coeffs: Vec<Complex64>,
}

/// Real samples of a 3-vector field on the uniform N^3 grid over
/// [0, 2pi)^3, component-major.
#[derive(Debug, Clone)]
pub struct PhysicalField {
    lattice: LatticeSpec,
    samples: Vec<f64>,
}

impl SpectralField {
    pub fn zeros(lattice: LatticeSpec) -> Self {
        SpectralField {
            lattice,
            coeffs: vec![Complex64::default(); 3 * lattice.mode_count()],
        }
    }

    pub fn from_coeffs(lattice: LatticeSpec, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != 3 * lattice.mode_count() {
            return Err(Error::Invariant(format!(
                "coefficient array length {} does not match lattice ({} expected)",
                coeffs.len(),
                3 * lattice.mode_count()
            )));
        }
        Ok(SpectralField { lattice, coeffs })
    }

    #[inline]
    pub fn lattice(&self) -> LatticeSpec {
        self.lattice
    }

    #[inline]
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    #[inline]
    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    #[inline]
    pub fn coeff(&self, kv: [i64; 3]) -> [Complex64; 3] {
        let i = 3 * self.lattice.mode_index(kv);
        [self.coeffs[i], self.coeffs[i + 1], self.coeffs[i + 2]]
    }

    pub fn set_coeff(&mut self, kv: [i64; 3], value: [Complex64; 3]) {
        let i = 3 * self.lattice.mode_index(kv);
        self.coeffs[i..i + 3].copy_from_slice(&value);
    }

    fn check_same_lattice(&self, other: &SpectralField) -> Result<()> {
        if self.lattice != other.lattice {
            return Err(Error::LatticeMismatch(
                format!("{:?}", self.lattice),
                format!("{:?}", other.lattice),
            ));
        }
        Ok(())
    }

    /// Worst relative violation of coeff(-k) = conj(coeff(k)).
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst = 0.0_f64;
        let mut scale = 0.0_f64;
        for (idx, kv) in self.lattice.wavevectors().enumerate() {
            let neg = self.lattice.mode_index([-kv[0], -kv[1], -kv[2]]);
            if neg < idx {
                continue;
            }
            let a = &self.coeffs[3 * idx..3 * idx + 3];
            let b = &self.coeffs[3 * neg..3 * neg + 3];
            for c in 0..3 {
                worst = worst.max((a[c] - b[c].conj()).norm());
                scale = scale.max(a[c].norm());
            }
        }
        if scale > 0.0 {
            worst / scale
        } else {
            0.0
        }
    }

    /// Worst relative divergence |k . c(k)| / |c(k)| over nonzero modes.
    pub fn divergence_defect(&self) -> f64 {
        let mut num = 0.0_f64;
        let mut den = 0.0_f64;
        for (idx, kv) in self.lattice.wavevectors().enumerate() {
            let c = &self.coeffs[3 * idx..3 * idx + 3];
            let k2 = (kv[0] * kv[0] + kv[1] * kv[1] + kv[2] * kv[2]) as f64;
            let mag2 = c[0].norm_sqr() + c[1].norm_sqr() + c[2].norm_sqr();
            let div = c[0] * kv[0] as f64 + c[1] * kv[1] as f64 + c[2] * kv[2] as f64;
            num += div.norm_sqr();
            den += k2 * mag2;
        }
        if den == 0.0 {
            0.0
        } else {
            (num / den).sqrt()
        }
    }

    pub fn mean_mode(&self) -> [Complex64; 3] {
        self.coeff([0, 0, 0])
    }

    /// curl: coefficient at k becomes i k x c(k). Exactly divergence-free.
    pub fn curl(&self) -> SpectralField {
        let mut out = SpectralField::zeros(self.lattice);
        for (idx, kv) in self.lattice.wavevectors().enumerate() {
            let c = &self.coeffs[3 * idx..3 * idx + 3];
            let (k1, k2, k3) = (kv[0] as f64, kv[1] as f64, kv[2] as f64);
            let i = Complex64::new(0.0, 1.0);
            out.coeffs[3 * idx] = i * (c[2] * k2 - c[1] * k3);
            out.coeffs[3 * idx + 1] = i * (c[0] * k3 - c[2] * k1);
            out.coeffs[3 * idx + 2] = i * (c[1] * k1 - c[0] * k2);
        }
        out
    }

    /// curl^{-1}: coefficient at k becomes i (k x c(k)) / |k|^2.
    ///
    /// Well-defined on mean-zero divergence-free fields; the mean mode must
    /// vanish.
    pub fn curl_inv(&self) -> Result<SpectralField> {
        let mean = self.mean_mode();
        let mean_mag = mean.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if mean_mag > 0.0 {
            return Err(Error::Invariant(format!(
                "curl_inv requires a mean-zero field, |c(0)| = {mean_mag:e}"
            )));
        }
        let mut out = SpectralField::zeros(self.lattice);
        for (idx, kv) in self.lattice.wavevectors().enumerate() {
            if kv == [0, 0, 0] {
                continue;
            }
            let c = &self.coeffs[3 * idx..3 * idx + 3];
            let (k1, k2, k3) = (kv[0] as f64, kv[1] as f64, kv[2] as f64);
            let k2norm = k1 * k1 + k2 * k2 + k3 * k3;
            let i = Complex64::new(0.0, 1.0 / k2norm);
            out.coeffs[3 * idx] = i * (c[2] * k2 - c[1] * k3);
            out.coeffs[3 * idx + 1] = i * (c[0] * k3 - c[2] * k1);
            out.coeffs[3 * idx + 2] = i * (c[1] * k1 - c[0] * k2);
        }
        Ok(out)
    }

    /// Leray projection onto divergence-free fields:
    /// c(k) <- c(k) - k (k . c(k)) / |k|^2, mean mode zeroed. Idempotent.
    pub fn leray_project(&self) -> SpectralField {
        let mut out = self.clone();
        for (idx, kv) in self.lattice.wavevectors().enumerate() {
            if kv == [0, 0, 0] {
                for c in &mut out.coeffs[3 * idx..3 * idx + 3] {
                    *c = Complex64::default();
                }
                continue;
            }
            let (k1, k2, k3) = (kv[0] as f64, kv[1] as f64, kv[2] as f64);
            let k2norm = k1 * k1 + k2 * k2 + k3 * k3;
            let c = &mut out.coeffs[3 * idx..3 * idx + 3];
            let dot = (c[0] * k1 + c[1] * k2 + c[2] * k3) / k2norm;
            c[0] -= dot * k1;
            c[1] -= dot * k2;
            c[2] -= dot * k3;
        }
        out
    }

    /// Sobolev norm ((2pi)^3 sum_{k != 0} |k|^{2s} |c(k)|^2)^{1/2}.
    pub fn sobolev_norm(&self, s: f64) -> Result<f64> {
        if !(-2.0..=2.0).contains(&s) {
            return Err(Error::Domain(format!(
                "Sobolev order s = {s} outside supported range [-2, 2]"
            )));
        }
        let mut sum = 0.0;
        for (idx, kv) in self.lattice.wavevectors().enumerate() {
            if kv == [0, 0, 0] {
                continue;
            }
            let c = &self.coeffs[3 * idx..3 * idx + 3];
            let mag2 = c[0].norm_sqr() + c[1].norm_sqr() + c[2].norm_sqr();
            if mag2 == 0.0 {
                continue;
            }
            let k2 = (kv[0] * kv[0] + kv[1] * kv[1] + kv[2] * kv[2]) as f64;
            sum += k2.powf(s) * mag2;
        }
        Ok((TORUS_VOLUME * sum).sqrt())
    }

    /// L2 norm, `sobolev_norm(0)` without the power evaluation.
    pub fn norm0(&self) -> f64 {
        let mean_idx = 3 * self.lattice.mode_index([0, 0, 0]);
        let mut sum = 0.0;
        for (i, c) in self.coeffs.iter().enumerate() {
            if i >= mean_idx && i < mean_idx + 3 {
                continue;
            }
            sum += c.norm_sqr();
        }
        (TORUS_VOLUME * sum).sqrt()
    }

    /// Heat/Stokes semigroup S(t): coefficient at k multiplied by
    /// e^{-|k|^2 t}. Exact on the truncated lattice.
    pub fn heat_propagate(&self, t: f64) -> Result<SpectralField> {
        if t < 0.0 {
            return Err(Error::Domain(format!(
                "heat_propagate needs t >= 0, got {t}"
            )));
        }
        let mut out = self.clone();
        for (idx, kv) in self.lattice.wavevectors().enumerate() {
            let k2 = (kv[0] * kv[0] + kv[1] * kv[1] + kv[2] * kv[2]) as f64;
            let decay = (-k2 * t).exp();
            for c in &mut out.coeffs[3 * idx..3 * idx + 3] {
                *c *= decay;
            }
        }
        Ok(out)
    }

    /// Parseval pairing (2pi)^3 sum Re(c_F(k) . conj(c_G(k))).
    pub fn l2_inner(&self, other: &SpectralField) -> Result<f64> {
        self.check_same_lattice(other)?;
        let sum: f64 = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a * b.conj()).re)
            .sum();
        Ok(TORUS_VOLUME * sum)
    }

    pub fn scaled(&self, c: f64) -> SpectralField {
        let mut out = self.clone();
        for v in &mut out.coeffs {
            *v *= c;
        }
        out
    }

    /// self + c * other.
    pub fn axpy(&self, c: f64, other: &SpectralField) -> Result<SpectralField> {
        self.check_same_lattice(other)?;
        let mut out = self.clone();
        for (a, b) in out.coeffs.iter_mut().zip(&other.coeffs) {
            *a += c * b;
        }
        Ok(out)
    }

    /// Spectral partial derivative along one axis: c(k) <- i k_axis c(k).
    pub fn partial_derivative(&self, axis: usize) -> SpectralField {
        assert!(axis < 3);
        let mut out = self.clone();
        for (idx, kv) in self.lattice.wavevectors().enumerate() {
            let ik = Complex64::new(0.0, kv[axis] as f64);
            for c in &mut out.coeffs[3 * idx..3 * idx + 3] {
                *c *= ik;
            }
        }
        out
    }

    /// Modulate coefficients by e^{-i (k, shift)}: translates the field by
    /// `shift`. Norm-preserving.
    pub fn translated(&self, shift: [f64; 3]) -> SpectralField {
        let mut out = self.clone();
        for (idx, kv) in self.lattice.wavevectors().enumerate() {
            let phase = kv[0] as f64 * shift[0] + kv[1] as f64 * shift[1] + kv[2] as f64 * shift[2];
            let m = Complex64::new(phase.cos(), -phase.sin());
            for c in &mut out.coeffs[3 * idx..3 * idx + 3] {
                *c *= m;
            }
        }
        out
    }

    /// Inverse transform to real grid samples.
    ///
    /// Errors if the Hermitian symmetry is violated beyond tolerance; the
    /// imaginary residue of the synthesis is checked against 1e-12 relative
    /// and discarded.
    pub fn to_physical(&self) -> Result<PhysicalField> {
        let defect = self.hermitian_defect();
        if defect > EPS_HERMITIAN {
            return Err(Error::Invariant(format!(
                "Hermitian symmetry violated: relative defect {defect:e}"
            )));
        }
        let lat = self.lattice;
        let ng = lat.grid_count();
        let mut samples = vec![0.0_f64; 3 * ng];
        let mut max_abs = 0.0_f64;
        let mut max_imag = 0.0_f64;
        let mut grid = vec![Complex64::default(); ng];
        for comp in 0..3 {
            grid.iter_mut().for_each(|c| *c = Complex64::default());
            for (idx, kv) in lat.wavevectors().enumerate() {
                let bin =
                    (lat.fft_bin(kv[0]) * lat.n + lat.fft_bin(kv[1])) * lat.n + lat.fft_bin(kv[2]);
                grid[bin] = self.coeffs[3 * idx + comp];
            }
            fft3_inplace(&mut grid, lat.n, true);
            for (g, s) in grid.iter().zip(&mut samples[comp * ng..(comp + 1) * ng]) {
                *s = g.re;
                max_abs = max_abs.max(g.re.abs());
                max_imag = max_imag.max(g.im.abs());
            }
        }
        if max_abs > 0.0 && max_imag > EPS_REALNESS * max_abs {
            return Err(Error::Invariant(format!(
                "imaginary residue {max_imag:e} exceeds tolerance for field of magnitude {max_abs:e}"
            )));
        }
        Ok(PhysicalField {
            lattice: lat,
            samples,
        })
    }

    /// Grid samples of one complex component (no realness check). Used by
    /// diagnostics and tests.
    pub fn component_grid(&self, comp: usize) -> Vec<Complex64> {
        let lat = self.lattice;
        let mut grid = vec![Complex64::default(); lat.grid_count()];
        for (idx, kv) in lat.wavevectors().enumerate() {
            let bin =
                (lat.fft_bin(kv[0]) * lat.n + lat.fft_bin(kv[1])) * lat.n + lat.fft_bin(kv[2]);
            grid[bin] = self.coeffs[3 * idx + comp];
        }
        fft3_inplace(&mut grid, lat.n, true);
        grid
    }
}

impl PhysicalField {
    pub fn new(lattice: LatticeSpec, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != 3 * lattice.grid_count() {
            return Err(Error::Invariant(format!(
                "sample array length {} does not match lattice ({} expected)",
                samples.len(),
                3 * lattice.grid_count()
            )));
        }
        Ok(PhysicalField { lattice, samples })
    }

    /// Evaluate a vector-valued function on the grid.
    pub fn from_fn(lattice: LatticeSpec, f: impl Fn([f64; 3]) -> [f64; 3]) -> Self {
        let n = lattice.n;
        let ng = lattice.grid_count();
        let mut samples = vec![0.0_f64; 3 * ng];
        for i0 in 0..n {
            for i1 in 0..n {
                for i2 in 0..n {
                    let x = [
                        lattice.grid_coord(i0),
                        lattice.grid_coord(i1),
                        lattice.grid_coord(i2),
                    ];
                    let v = f(x);
                    let g = (i0 * n + i1) * n + i2;
                    samples[g] = v[0];
                    samples[ng + g] = v[1];
                    samples[2 * ng + g] = v[2];
                }
            }
        }
        PhysicalField { lattice, samples }
    }

    #[inline]
    pub fn lattice(&self) -> LatticeSpec {
        self.lattice
    }

    #[inline]
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Samples of one component.
    #[inline]
    pub fn component(&self, comp: usize) -> &[f64] {
        let ng = self.lattice.grid_count();
        &self.samples[comp * ng..(comp + 1) * ng]
    }

    /// Physical L2 norm by grid quadrature, (2pi/N)^3 sum |f|^2.
    pub fn norm0_grid(&self) -> f64 {
        let w = TORUS_VOLUME / self.lattice.grid_count() as f64;
        (w * self.samples.iter().map(|s| s * s).sum::<f64>()).sqrt()
    }

    /// Forward transform: discrete Fourier analysis, modes above the cutoff
    /// discarded, mean mode zeroed.
    pub fn to_spectral(&self) -> SpectralField {
        let lat = self.lattice;
        let ng = lat.grid_count();
        let norm = 1.0 / ng as f64;
        let mut out = SpectralField::zeros(lat);
        let mut grid = vec![Complex64::default(); ng];
        for comp in 0..3 {
            for (g, s) in grid.iter_mut().zip(self.component(comp)) {
                *g = Complex64::new(*s, 0.0);
            }
            fft3_inplace(&mut grid, lat.n, false);
            for (idx, kv) in lat.wavevectors().enumerate() {
                if kv == [0, 0, 0] {
                    continue;
                }
                let bin =
                    (lat.fft_bin(kv[0]) * lat.n + lat.fft_bin(kv[1])) * lat.n + lat.fft_bin(kv[2]);
                out.coeffs[3 * idx + comp] = grid[bin] * norm;
            }
        }
        out
    }
}

/// Synthesize two Hermitian-symmetric spectral scalars in one complex FFT:
/// the inverse transform of a + i b has real part a and imaginary part b on
/// the grid. `b` may be empty to synthesize a single scalar.
///
/// Inputs are coefficient arrays of length `mode_count()` in lexicographic
/// k order.
pub(crate) fn synth_pair(
    lat: LatticeSpec,
    a: &[Complex64],
    b: Option<&[Complex64]>,
    out_a: &mut [f64],
    out_b: &mut [f64],
    grid: &mut Vec<Complex64>,
) {
    let ng = lat.grid_count();
    grid.clear();
    grid.resize(ng, Complex64::default());
    let i = Complex64::new(0.0, 1.0);
    for (idx, kv) in lat.wavevectors().enumerate() {
        let bin = (lat.fft_bin(kv[0]) * lat.n + lat.fft_bin(kv[1])) * lat.n + lat.fft_bin(kv[2]);
        grid[bin] = match b {
            Some(b) => a[idx] + i * b[idx],
            None => a[idx],
        };
    }
    fft3_inplace(grid, lat.n, true);
    for (g, o) in grid.iter().zip(out_a.iter_mut()) {
        *o = g.re;
    }
    if b.is_some() {
        for (g, o) in grid.iter().zip(out_b.iter_mut()) {
            *o = g.im;
        }
    }
}
