//! Multi-dimensional FFT over row-major arrays (last axis fastest).

use num_complex::Complex;
use rustfft::{FftDirection, FftPlanner};

use crate::scalar::Real;

/// In-place unnormalized transform along every axis of `shape`.
pub fn fft_nd<T: Real>(data: &mut [Complex<T>], shape: &[usize], direction: FftDirection) {
    let total: usize = shape.iter().product();
    assert_eq!(data.len(), total, "buffer does not match shape");
    let mut planner = FftPlanner::<T>::new();
    let mut stride = 1;
    for axis in (0..shape.len()).rev() {
        let len = shape[axis];
        let fft = planner.plan_fft(len, direction);
        let mut line = vec![Complex::new(T::zero(), T::zero()); len];
        let block = len * stride;
        for outer in (0..total).step_by(block) {
            for inner in 0..stride {
                let base = outer + inner;
                for (i, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + i * stride];
                }
                fft.process(&mut line);
                for (i, v) in line.iter().enumerate() {
                    data[base + i * stride] = *v;
                }
            }
        }
        stride *= len;
    }
}

/// Signed DFT frequency `2π m/n` for index `m`, mapped to `(−π, π]`.
pub fn frequency<T: Real>(m: usize, n: usize) -> T {
    let signed = if 2 * m > n {
        m as f64 - n as f64
    } else {
        m as f64
    };
    T::lit(2.0 * std::f64::consts::PI * signed / n as f64)
}

/// Row-major multi-index of a flat offset.
pub fn unravel(mut flat: usize, shape: &[usize], out: &mut [usize]) {
    for axis in (0..shape.len()).rev() {
        out[axis] = flat % shape[axis];
        flat /= shape[axis];
    }
}

pub fn ravel(index: &[usize], shape: &[usize]) -> usize {
    index
        .iter()
        .zip(shape)
        .fold(0, |acc, (&i, &n)| acc * n + i)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_2d() {
        let shape = [3, 4];
        let orig: Vec<Complex<f64>> = (0..12).map(|i| Complex::new(i as f64, -(i as f64) / 3.0)).collect();
        let mut data = orig.clone();
        fft_nd(&mut data, &shape, FftDirection::Forward);
        fft_nd(&mut data, &shape, FftDirection::Inverse);
        for (a, b) in data.iter().zip(&orig) {
            assert!((a / 12.0 - b).norm() < 1e-12);
        }
    }

    #[test]
    fn impulse_is_flat() {
        let shape = [4, 2];
        let mut data = vec![Complex::new(0.0f64, 0.0); 8];
        data[0] = Complex::new(1.0, 0.0);
        fft_nd(&mut data, &shape, FftDirection::Forward);
        assert!(data.iter().all(|v| (v - Complex::new(1.0, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn index_helpers() {
        let shape = [3, 5];
        let mut idx = [0; 2];
        unravel(13, &shape, &mut idx);
        assert_eq!(idx, [2, 3]);
        assert_eq!(ravel(&idx, &shape), 13);
        assert!((frequency::<f64>(3, 4) + std::f64::consts::FRAC_PI_2).abs() < 1e-15);
    }
}
