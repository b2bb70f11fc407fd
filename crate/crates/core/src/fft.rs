//! Cached 3-D complex FFTs on the N^3 grid.
//!
//! rustfft provides the 1-D kernels; the three axes are swept with an
//! explicit gather/scatter for the strided directions. Plans are cached
//! per (size, direction) behind a mutex so field operations stay pure.

use num_complex::Complex64;
use once_cell::sync::Lazy;
use rustfft::{Fft, FftDirection, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, Mutex};

static PLANS: Lazy<Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>> =
    Lazy::new(|| Mutex::new(HashMap::new()));

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let mut cache = PLANS.lock().unwrap();
    cache
        .entry((n, inverse))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            planner.plan_fft(
                n,
                if inverse {
                    FftDirection::Inverse
                } else {
                    FftDirection::Forward
                },
            )
        })
        .clone()
}

/// In-place 3-D FFT of an N^3 array in row-major (i0, i1, i2) order.
///
/// `inverse == true` computes sum_k c(k) e^{+i k.x} (unnormalized
/// synthesis); `inverse == false` computes the unnormalized analysis sum.
/// Callers apply the 1/N^3 analysis normalization themselves.
pub fn fft3_inplace(data: &mut [Complex64], n: usize, inverse: bool) {
    assert_eq!(data.len(), n * n * n);
    let fft = plan(n, inverse);
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];

    // Axis 2: contiguous lines.
    for line in data.chunks_exact_mut(n) {
        fft.process_with_scratch(line, &mut scratch);
    }

    // Axis 1: stride n within each i0-plane.
    let mut buf = vec![Complex64::default(); n];
    for i0 in 0..n {
        let plane = &mut data[i0 * n * n..(i0 + 1) * n * n];
        for i2 in 0..n {
            for i1 in 0..n {
                buf[i1] = plane[i1 * n + i2];
            }
            fft.process_with_scratch(&mut buf, &mut scratch);
            for i1 in 0..n {
                plane[i1 * n + i2] = buf[i1];
            }
        }
    }

    // Axis 0: stride n^2.
    let n2 = n * n;
    for rest in 0..n2 {
        for i0 in 0..n {
            buf[i0] = data[i0 * n2 + rest];
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for i0 in 0..n {
            data[i0 * n2 + rest] = buf[i0];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_mode_synthesis() {
        // c(k) = 1 at k = (0,0,1) -> f(x) = e^{i x3}
        let n = 8;
        let mut data = vec![Complex64::default(); n * n * n];
        data[1] = Complex64::new(1.0, 0.0);
        fft3_inplace(&mut data, n, true);
        for i0 in 0..n {
            for i1 in 0..n {
                for i2 in 0..n {
                    let x3 = 2.0 * std::f64::consts::PI * i2 as f64 / n as f64;
                    let expect = Complex64::new(x3.cos(), x3.sin());
                    let got = data[(i0 * n + i1) * n + i2];
                    assert!((got - expect).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn forward_inverse_roundtrip() {
        let n = 6;
        let mut data: Vec<Complex64> = (0..n * n * n)
            .map(|i| Complex64::new((i as f64).sin(), (i as f64 * 0.7).cos()))
            .collect();
        let orig = data.clone();
        fft3_inplace(&mut data, n, false);
        fft3_inplace(&mut data, n, true);
        let scale = (n * n * n) as f64;
        for (a, b) in data.iter().zip(&orig) {
            assert!((a / scale - b).norm() < 1e-12);
        }
    }
}
