//! Realizations `X = R⁻¹z` and empirical covariance estimates.
//!
//! Normals come from ChaCha20 seeded with `seed` and switched to stream
//! `index` for realization `index`, transformed by Box–Muller. Each
//! realization therefore depends only on `(seed, index)`, not on thread
//! scheduling.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use rustfft::FftDirection;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::factor::CholeskyFactor;
use crate::fft::fft_nd;
use crate::lattice::{Boundary, LatticeGrid};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldRealization<T> {
    pub grid: LatticeGrid<T>,
    /// Values on the target grid, lexicographic order.
    pub values: Vec<T>,
    pub seed: u64,
    pub index: u64,
}

/// `n` standard normals for realization `index` of `seed`.
pub fn standard_normals<T: Real>(seed: u64, index: u64, n: usize) -> Vec<T> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let mut out = Vec::with_capacity(n + 1);
    while out.len() < n {
        // u1 in (0, 1] keeps the logarithm finite
        let u1: f64 = 1.0 - rng.random::<f64>();
        let u2: f64 = rng.random::<f64>();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * std::f64::consts::PI * u2;
        out.push(T::lit(radius * angle.cos()));
        out.push(T::lit(radius * angle.sin()));
    }
    out.truncate(n);
    out
}

/// Maps normals `z` (internal numbering) to a field in original numbering:
/// `R⁻¹z` in plain form, `L⁻¹(z ⊘ √D)` in unit-diagonal form.
pub fn realize_from_normals<T: Real>(factor: &CholeskyFactor<T>, z: &[T]) -> Result<Vec<T>> {
    let rhs: Vec<T> = match factor.diagonal_weights() {
        None => z.to_vec(),
        Some(d) => {
            if d.len() != z.len() {
                return Err(Error::DimensionMismatch {
                    expected: d.len(),
                    found: z.len(),
                });
            }
            z.iter().zip(d).map(|(&zi, &di)| zi / di.sqrt()).collect()
        }
    };
    let x = factor.solve_upper(&rhs)?;
    let mut out = vec![T::zero(); x.len()];
    for (new, &old) in factor.permutation().iter().enumerate() {
        out[old] = x[new];
    }
    Ok(out)
}

/// Draws `count` realizations; `grid` must be the grid the factor was
/// assembled on. Extended grids are cropped to the target.
pub fn sample_field<T: Real>(
    factor: &CholeskyFactor<T>,
    grid: &LatticeGrid<T>,
    seed: u64,
    count: usize,
) -> Result<Vec<FieldRealization<T>>> {
    if count == 0 {
        return Err(Error::InvalidParameters("count must be at least 1".into()));
    }
    if grid.computational_total() != factor.n() {
        return Err(Error::DimensionMismatch {
            expected: factor.n(),
            found: grid.computational_total(),
        });
    }
    (0..count as u64)
        .into_par_iter()
        .map(|index| {
            let z = standard_normals(seed, index, factor.n());
            let full = realize_from_normals(factor, &z)?;
            Ok(FieldRealization {
                grid: grid.clone(),
                values: grid.crop(&full),
                seed,
                index,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "layout")]
pub enum CovarianceLayout {
    /// Translation-averaged covariance per lag on a periodic grid; entry
    /// `idx` is lag `idx` (mod shape).
    Lags { shape: Vec<usize> },
    /// Full `n × n` matrix, row-major.
    Matrix { n: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalCovariance<T> {
    pub layout: CovarianceLayout,
    pub values: Vec<T>,
    /// CLT standard error of each entry, from the spread of the
    /// per-realization products.
    pub standard_errors: Vec<T>,
    pub count: usize,
}

impl<T: Real> EmpiricalCovariance<T> {
    /// Covariance between grid points `i` and `j` (flat indices).
    pub fn entry(&self, i: usize, j: usize) -> T {
        self.values[self.offset(i, j)]
    }

    pub fn standard_error(&self, i: usize, j: usize) -> T {
        self.standard_errors[self.offset(i, j)]
    }

    fn offset(&self, i: usize, j: usize) -> usize {
        match &self.layout {
            CovarianceLayout::Matrix { n } => i * n + j,
            CovarianceLayout::Lags { shape } => {
                let mut offset = 0;
                let (mut a, mut b) = (i, j);
                let mut stride = 1;
                for &n in shape.iter().rev() {
                    let lag = (b % n + n - a % n) % n;
                    offset += lag * stride;
                    stride *= n;
                    a /= n;
                    b /= n;
                }
                offset
            }
        }
    }
}

/// Unbiased covariance estimate from independent realizations. On periodic
/// grids the estimate is averaged over all translations.
pub fn empirical_covariance<T: Real>(realizations: &[FieldRealization<T>]) -> Result<EmpiricalCovariance<T>> {
    let count = realizations.len();
    if count < 2 {
        return Err(Error::InvalidParameters("need at least two realizations".into()));
    }
    let grid = &realizations[0].grid;
    let n = grid.total();
    if let Some(bad) = realizations.iter().find(|r| r.values.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: bad.values.len(),
        });
    }
    let cnt = T::from_usize_lossy(count);
    let mut mean = vec![T::zero(); n];
    for r in realizations {
        for (m, &v) in mean.iter_mut().zip(&r.values) {
            *m = *m + v;
        }
    }
    for m in &mut mean {
        *m = *m / cnt;
    }

    let (stats, centre, layout): (Vec<Vec<T>>, Vec<T>, _) = if grid.boundary() == Boundary::Periodic {
        let shape = grid.n().to_vec();
        let auto = |x: &[T]| circular_autocorrelation(x, &shape);
        let stats = realizations.par_iter().map(|r| auto(&r.values)).collect();
        (stats, auto(&mean), CovarianceLayout::Lags { shape })
    } else {
        let outer = |x: &[T]| {
            let mut m = Vec::with_capacity(n * n);
            for &a in x {
                for &b in x {
                    m.push(a * b);
                }
            }
            m
        };
        let stats = realizations.par_iter().map(|r| outer(&r.values)).collect();
        (stats, outer(&mean), CovarianceLayout::Matrix { n })
    };

    let m = centre.len();
    let mut sum = vec![T::zero(); m];
    let mut sum_sq = vec![T::zero(); m];
    for s in &stats {
        for e in 0..m {
            sum[e] = sum[e] + s[e];
            sum_sq[e] = sum_sq[e] + s[e] * s[e];
        }
    }
    let one = T::one();
    let values = (0..m)
        .map(|e| (sum[e] - cnt * centre[e]) / (cnt - one))
        .collect();
    let standard_errors = (0..m)
        .map(|e| {
            let avg = sum[e] / cnt;
            let var = ((sum_sq[e] - cnt * avg * avg) / (cnt - one)).max(T::zero());
            (var / cnt).sqrt()
        })
        .collect();
    Ok(EmpiricalCovariance {
        layout,
        values,
        standard_errors,
        count,
    })
}

/// `(1/N) Σ_i x(i) x(i + τ)` for every lag `τ` on a periodic grid.
fn circular_autocorrelation<T: Real>(x: &[T], shape: &[usize]) -> Vec<T> {
    let total = x.len();
    let mut data: Vec<Complex<T>> = x.iter().map(|&v| Complex::new(v, T::zero())).collect();
    fft_nd(&mut data, shape, FftDirection::Forward);
    for c in &mut data {
        *c = Complex::new(c.norm_sqr(), T::zero());
    }
    fft_nd(&mut data, shape, FftDirection::Inverse);
    let scale = T::from_usize_lossy(total) * T::from_usize_lossy(total);
    data.into_iter().map(|c| c.re / scale).collect()
}
