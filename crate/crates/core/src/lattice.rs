use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Discretization of the torus: `n` grid samples per axis and a hard
/// spherical-cube mode cutoff `|k_i| <= k`.
///
/// `n >= 3k + 1` so that grid quadrature of triple products of
/// band-limited fields is exact (no aliasing back into the retained band).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticeSpec {
    /// Samples per axis (even).
    pub n: usize,
    /// Mode cutoff: retain wavevectors with max |k_i| <= K.
    pub k: usize,
}

impl LatticeSpec {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if k < 1 {
            return Err(Error::Config(format!("cutoff K must be >= 1, got {k}")));
        }
        if n % 2 != 0 {
            return Err(Error::Config(format!("grid size N must be even, got {n}")));
        }
        if n < 3 * k + 1 {
            return Err(Error::Config(format!(
                "grid size N = {n} too small for cutoff K = {k}: need N >= 3K + 1 = {}",
                3 * k + 1
            )));
        }
        Ok(LatticeSpec { n, k })
    }

    /// Modes per axis, 2K + 1.
    #[inline]
    pub fn modes_per_axis(&self) -> usize {
        2 * self.k + 1
    }

    /// Total retained wavevectors, (2K + 1)^3.
    #[inline]
    pub fn mode_count(&self) -> usize {
        let m = self.modes_per_axis();
        m * m * m
    }

    /// Grid points, N^3.
    #[inline]
    pub fn grid_count(&self) -> usize {
        self.n * self.n * self.n
    }

    /// Lexicographic index of wavevector `k` in the coefficient array.
    #[inline]
    pub fn mode_index(&self, kv: [i64; 3]) -> usize {
        let m = self.modes_per_axis() as i64;
        let kk = self.k as i64;
        debug_assert!(kv.iter().all(|&c| c.abs() <= kk));
        (((kv[0] + kk) * m + (kv[1] + kk)) * m + (kv[2] + kk)) as usize
    }

    /// Wavevector for a lexicographic index.
    #[inline]
    pub fn wavevector(&self, idx: usize) -> [i64; 3] {
        let m = self.modes_per_axis();
        let kk = self.k as i64;
        let k3 = (idx % m) as i64 - kk;
        let k2 = ((idx / m) % m) as i64 - kk;
        let k1 = (idx / (m * m)) as i64 - kk;
        [k1, k2, k3]
    }

    /// Iterate all retained wavevectors in lexicographic order.
    pub fn wavevectors(&self) -> impl Iterator<Item = [i64; 3]> + '_ {
        (0..self.mode_count()).map(move |i| self.wavevector(i))
    }

    /// Grid coordinate of sample index along one axis, in [0, 2pi).
    #[inline]
    pub fn grid_coord(&self, j: usize) -> f64 {
        2.0 * std::f64::consts::PI * j as f64 / self.n as f64
    }

    /// FFT bin of a signed wavenumber on the N-periodic grid.
    #[inline]
    pub fn fft_bin(&self, k: i64) -> usize {
        k.rem_euclid(self.n as i64) as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_lattices() {
        assert!(LatticeSpec::new(8, 0).is_err());
        assert!(LatticeSpec::new(7, 2).is_err(), "odd N");
        assert!(LatticeSpec::new(6, 2).is_err(), "N < 3K+1");
        assert!(LatticeSpec::new(8, 2).is_ok());
    }

    #[test]
    fn mode_index_roundtrip() {
        let lat = LatticeSpec::new(16, 3).unwrap();
        for (i, kv) in lat.wavevectors().enumerate() {
            assert_eq!(lat.mode_index(kv), i);
            assert_eq!(lat.wavevector(i), kv);
        }
        assert_eq!(lat.mode_count(), 343);
    }

    #[test]
    fn fft_bin_wraps_negatives() {
        let lat = LatticeSpec::new(16, 3).unwrap();
        assert_eq!(lat.fft_bin(0), 0);
        assert_eq!(lat.fft_bin(3), 3);
        assert_eq!(lat.fft_bin(-1), 15);
        assert_eq!(lat.fft_bin(-3), 13);
    }
}
