//! Periodic lattices, difference operators and precision assembly.
//!
//! Grid points are numbered lexicographically with axis 0 slowest. Every
//! operator is a stencil (integer offsets → integer coefficients) applied
//! with periodic wrap; when a grid is shorter than the stencil, the
//! wrapped coefficients are summed so the circulant symbol is unchanged.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex;
use rayon::prelude::*;
use rustfft::FftDirection;
use serde::Serialize;

use crate::covariance::SymbolMode;
use crate::error::{Error, Result};
use crate::fft::{fft_nd, ravel, unravel};
use crate::scalar::Real;
use crate::sparse::CsrMatrix;
use crate::spectrum::TaylorSpectrum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "factor")]
pub enum Boundary {
    Periodic,
    /// Embed the target grid in one `factor` times larger per axis,
    /// compute there, and crop back to the target.
    PeriodicExtended(usize),
}

impl Boundary {
    pub fn factor(&self) -> usize {
        match *self {
            Boundary::Periodic => 1,
            Boundary::PeriodicExtended(f) => f,
        }
    }
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Boundary::Periodic => f.write_str("periodic"),
            Boundary::PeriodicExtended(k) => write!(f, "periodic_extended({k})"),
        }
    }
}

impl std::str::FromStr for Boundary {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if s == "periodic" {
            return Ok(Boundary::Periodic);
        }
        let inner = s
            .strip_prefix("periodic_extended(")
            .and_then(|r| r.strip_suffix(')'))
            .or_else(|| s.strip_prefix("periodic_extended:"))
            .ok_or_else(|| Error::UnsupportedBoundary(s.clone()))?;
        let factor: usize = inner
            .trim()
            .parse()
            .map_err(|_| Error::UnsupportedBoundary(s.clone()))?;
        if factor == 0 {
            return Err(Error::UnsupportedBoundary(s));
        }
        Ok(Boundary::PeriodicExtended(factor))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatticeGrid<T> {
    h: T,
    n: Vec<usize>,
    boundary: Boundary,
}

impl<T: Real> LatticeGrid<T> {
    pub fn new(h: T, n: Vec<usize>, boundary: Boundary) -> Result<Self> {
        if !(h > T::zero()) || !h.is_finite() {
            return Err(Error::InvalidGrid(format!("step h = {h} must be positive")));
        }
        if n.is_empty() || n.len() > 3 {
            return Err(Error::InvalidGrid(format!("dimension {} not in 1..=3", n.len())));
        }
        if let Some(&bad) = n.iter().find(|&&np| np < 3) {
            return Err(Error::InvalidGrid(format!("{bad} points per axis; at least 3 needed")));
        }
        if boundary.factor() == 0 {
            return Err(Error::UnsupportedBoundary(boundary.to_string()));
        }
        Ok(Self { h, n, boundary })
    }

    /// Square grid of `points` per axis.
    pub fn cube(d: usize, h: T, points: usize, boundary: Boundary) -> Result<Self> {
        Self::new(h, vec![points; d], boundary)
    }

    pub fn d(&self) -> usize {
        self.n.len()
    }

    pub fn h(&self) -> T {
        self.h
    }

    /// Target extents per axis.
    pub fn n(&self) -> &[usize] {
        &self.n
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn total(&self) -> usize {
        self.n.iter().product()
    }

    /// Extents of the grid the operators actually live on.
    pub fn computational_shape(&self) -> Vec<usize> {
        self.n.iter().map(|&np| np * self.boundary.factor()).collect()
    }

    pub fn computational_total(&self) -> usize {
        self.computational_shape().iter().product()
    }

    /// Restrict a computational-grid vector to the target grid (the corner
    /// block starting at the origin).
    pub fn crop<V: Copy>(&self, values: &[V]) -> Vec<V> {
        let shape = self.computational_shape();
        assert_eq!(values.len(), shape.iter().product::<usize>());
        if self.boundary.factor() == 1 {
            return values.to_vec();
        }
        let mut idx = vec![0; self.d()];
        (0..self.total())
            .map(|flat| {
                unravel(flat, &self.n, &mut idx);
                values[ravel(&idx, &shape)]
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    pub fn of<T: Real>(x: T) -> Self {
        if x < T::zero() {
            Sign::Negative
        } else {
            Sign::Positive
        }
    }

    pub fn as_real<T: Real>(&self) -> T {
        match self {
            Sign::Positive => T::one(),
            Sign::Negative => -T::one(),
        }
    }
}

/// One signed, weighted square-root term `sign · weight · GᵀG`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseFactorTerm<T> {
    pub k: usize,
    pub weight: T,
    pub sign: Sign,
    pub g: CsrMatrix<T>,
}

impl<T: Real> SparseFactorTerm<T> {
    pub fn gram(&self) -> CsrMatrix<T> {
        self.g.weighted_gram(T::one())
    }

    pub fn signed_gram(&self) -> CsrMatrix<T> {
        self.g.weighted_gram(self.sign.as_real::<T>() * self.weight)
    }
}

type Stencil = BTreeMap<Vec<i64>, i64>;

fn delta(d: usize) -> Stencil {
    let mut s = Stencil::new();
    s.insert(vec![0; d], 1);
    s
}

fn convolve(a: &Stencil, b: &Stencil) -> Stencil {
    let mut out = Stencil::new();
    for (oa, &ca) in a {
        for (ob, &cb) in b {
            let off: Vec<i64> = oa.iter().zip(ob).map(|(x, y)| x + y).collect();
            *out.entry(off).or_insert(0) += ca * cb;
        }
    }
    out.retain(|_, c| *c != 0);
    out
}

fn power(base: &Stencil, d: usize, k: usize) -> Stencil {
    (0..k).fold(delta(d), |acc, _| convolve(&acc, base))
}

/// `δ_0 − δ_{−e_p}` along `axis`.
fn backward_difference(d: usize, axis: usize) -> Stencil {
    let mut s = delta(d);
    let mut off = vec![0; d];
    off[axis] = -1;
    s.insert(off, -1);
    s
}

/// `−Δ_h h²`: `2d` at the centre, `−1` at each nearest neighbour.
fn negative_laplacian(d: usize) -> Stencil {
    let mut s = Stencil::new();
    s.insert(vec![0; d], 2 * d as i64);
    for p in 0..d {
        for step in [-1, 1] {
            let mut off = vec![0; d];
            off[p] = step;
            s.insert(off, -1);
        }
    }
    s
}

/// The stencils whose stacked rows form `G` for order `k`.
fn stencil_blocks(d: usize, k: usize, mode: SymbolMode) -> Vec<Stencil> {
    if k == 0 {
        return vec![delta(d)];
    }
    match mode {
        SymbolMode::Separable => (0..d)
            .map(|p| power(&backward_difference(d, p), d, k))
            .collect(),
        SymbolMode::LaplacianPower if k % 2 == 0 => {
            vec![power(&negative_laplacian(d), d, k / 2)]
        }
        SymbolMode::LaplacianPower => {
            let lap = power(&negative_laplacian(d), d, (k - 1) / 2);
            (0..d)
                .map(|p| convolve(&backward_difference(d, p), &lap))
                .collect()
        }
    }
}

fn stencil_matrix<T: Real>(shape: &[usize], blocks: &[Stencil]) -> CsrMatrix<T> {
    let total: usize = shape.iter().product();
    let d = shape.len();
    let mut triplets = Vec::new();
    let mut idx = vec![0; d];
    let mut target = vec![0; d];
    for (b, stencil) in blocks.iter().enumerate() {
        for row in 0..total {
            unravel(row, shape, &mut idx);
            for (off, &c) in stencil {
                for p in 0..d {
                    let n = shape[p] as i64;
                    target[p] = (idx[p] as i64 + off[p]).rem_euclid(n) as usize;
                }
                triplets.push((b * total + row, ravel(&target, shape), T::lit(c as f64)));
            }
        }
    }
    CsrMatrix::from_triplets(blocks.len() * total, total, triplets)
}

/// Square-root operator of order `k` on the computational grid, with unit
/// weight and positive sign. `GᵀG` has circulant symbol `S_k(ξ)`.
pub fn difference_operator<T: Real>(
    grid: &LatticeGrid<T>,
    k: usize,
    mode: SymbolMode,
) -> SparseFactorTerm<T> {
    let shape = grid.computational_shape();
    let blocks = stencil_blocks(grid.d(), k, mode);
    SparseFactorTerm {
        k,
        weight: T::one(),
        sign: Sign::Positive,
        g: stencil_matrix(&shape, &blocks),
    }
}

/// Eigenvalues of a circulant (periodic, translation-invariant) matrix on
/// `shape`: the DFT of its first row, returned in DFT index order.
pub fn circulant_eigenvalues<T: Real>(matrix: &CsrMatrix<T>, shape: &[usize]) -> Vec<T> {
    let total: usize = shape.iter().product();
    assert_eq!(matrix.nrows(), total);
    let mut data = vec![Complex::new(T::zero(), T::zero()); total];
    let (cols, vals) = matrix.row(0);
    for (&c, &v) in cols.iter().zip(vals) {
        data[c] = Complex::new(v, T::zero());
    }
    fft_nd(&mut data, shape, FftDirection::Forward);
    data.into_iter().map(|c| c.re).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionAssembly<T> {
    pub grid: LatticeGrid<T>,
    pub mode: SymbolMode,
    pub terms: Vec<SparseFactorTerm<T>>,
    pub q: CsrMatrix<T>,
}

impl<T: Real> PrecisionAssembly<T> {
    pub fn has_negative_terms(&self) -> bool {
        self.terms.iter().any(|t| t.sign == Sign::Negative)
    }
}

/// `Q = Σ_k sign(a_k) |c_k| h^{d−2k}/σ² · G_kᵀG_k` on the computational
/// grid. Terms with a zero coefficient are omitted.
pub fn assemble_precision<T: Real>(
    spec: &TaylorSpectrum<T>,
    grid: &LatticeGrid<T>,
    mode: SymbolMode,
) -> Result<PrecisionAssembly<T>> {
    let params = spec.params();
    if params.d() != grid.d() {
        return Err(Error::DimensionMismatch {
            expected: params.d(),
            found: grid.d(),
        });
    }
    let h = grid.h();
    let d = grid.d() as i32;
    let sigma2 = params.sigma2();
    let terms: Vec<SparseFactorTerm<T>> = spec
        .scaled()
        .par_iter()
        .enumerate()
        .filter(|(_, c)| **c != T::zero())
        .map(|(k, &c)| {
            let mut term = difference_operator(grid, k, mode);
            term.weight = c.abs() * h.powi(d - 2 * k as i32) / sigma2;
            term.sign = Sign::of(c);
            term
        })
        .collect();
    let n = grid.computational_total();
    let q = terms
        .par_iter()
        .map(|t| t.signed_gram())
        .reduce(|| CsrMatrix::from_triplets(n, n, Vec::new()), |a, b| a.add(&b));
    Ok(PrecisionAssembly {
        grid: grid.clone(),
        mode,
        terms,
        q,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fft::frequency;
    use crate::spectrum::{taylor_coefficients, MaternParams};

    fn grid(n: Vec<usize>) -> LatticeGrid<f64> {
        LatticeGrid::new(0.1, n, Boundary::Periodic).unwrap()
    }

    #[test]
    fn three_point_first_difference() {
        let t = difference_operator(&grid(vec![3]), 1, SymbolMode::Separable);
        assert_eq!(
            t.gram().to_dense(),
            vec![2.0, -1.0, -1.0, -1.0, 2.0, -1.0, -1.0, -1.0, 2.0]
        );
        assert_eq!(t.g.get(0, 0), 1.0);
        assert_eq!(t.g.get(0, 2), -1.0);
    }

    #[test]
    fn order_zero_is_identity() {
        for mode in [SymbolMode::Separable, SymbolMode::LaplacianPower] {
            let t = difference_operator(&grid(vec![4, 5]), 0, mode);
            assert_eq!(t.gram(), CsrMatrix::identity(20));
        }
    }

    #[test]
    fn symbols_on_small_grids() {
        // includes grids shorter than the stencil, where coefficients wrap
        for shape in [vec![3], vec![7], vec![4, 3], vec![5, 6], vec![3, 3, 4]] {
            let g = grid(shape.clone());
            for k in 0..=5 {
                for mode in [SymbolMode::Separable, SymbolMode::LaplacianPower] {
                    let eig = circulant_eigenvalues(&difference_operator(&g, k, mode).gram(), &shape);
                    let mut idx = vec![0; shape.len()];
                    for (flat, &e) in eig.iter().enumerate() {
                        unravel(flat, &shape, &mut idx);
                        let s: Vec<f64> = idx
                            .iter()
                            .zip(&shape)
                            .map(|(&m, &n)| 2.0 - 2.0 * frequency::<f64>(m, n).cos())
                            .collect();
                        let expected = if k == 0 {
                            1.0
                        } else if mode == SymbolMode::Separable {
                            s.iter().map(|x| x.powi(k as i32)).sum()
                        } else {
                            s.iter().sum::<f64>().powi(k as i32)
                        };
                        assert!(
                            (e - expected).abs() <= 1e-12 * expected.abs().max(1.0),
                            "shape {shape:?} k {k} {mode:?}: {e} vs {expected}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn white_noise_assembly() {
        let p = MaternParams::new(1.5, 2.0, 0.5, 2).unwrap();
        let spec = taylor_coefficients(p, 0);
        let g = LatticeGrid::new(0.2, vec![3, 4], Boundary::Periodic).unwrap();
        let a = assemble_precision(&spec, &g, SymbolMode::LaplacianPower).unwrap();
        let expected = 2f64.powi(3) * 0.04 / 0.5;
        assert_eq!(a.q.nnz(), 12);
        for i in 0..12 {
            assert!((a.q.get(i, i) - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn signs_and_weights() {
        let p = MaternParams::new(1.5, 1.0, 2.0, 1).unwrap();
        let spec = taylor_coefficients(p, 4);
        let a = assemble_precision(&spec, &grid(vec![16]), SymbolMode::Separable).unwrap();
        let signs: Vec<Sign> = a.terms.iter().map(|t| t.sign).collect();
        assert_eq!(
            signs,
            vec![Sign::Positive, Sign::Positive, Sign::Positive, Sign::Negative, Sign::Positive]
        );
        // |a_3| h^{1−6} / σ² with a_3 = −1/16
        assert!((a.terms[3].weight - 0.0625 * 0.1f64.powi(-5) / 2.0).abs() < 1e-6);
        assert!(a.has_negative_terms());
        assert!(a.q.is_symmetric(1e-12));
    }

    #[test]
    fn integer_alpha_skips_zero_terms() {
        let p = MaternParams::new(2.0, 1.0, 1.0, 1).unwrap();
        let a = assemble_precision(&taylor_coefficients(p, 5), &grid(vec![8]), SymbolMode::Separable)
            .unwrap();
        assert_eq!(a.terms.iter().map(|t| t.k).collect::<Vec<_>>(), vec![0, 1, 2]);
    }

    #[test]
    fn extended_grid_and_crop() {
        let g = LatticeGrid::new(0.5, vec![3, 4], Boundary::PeriodicExtended(2)).unwrap();
        assert_eq!(g.computational_shape(), vec![6, 8]);
        let values: Vec<usize> = (0..48).collect();
        assert_eq!(g.crop(&values), vec![0, 1, 2, 3, 8, 9, 10, 11, 16, 17, 18, 19]);
        assert_eq!("periodic_extended(3)".parse::<Boundary>().unwrap(), Boundary::PeriodicExtended(3));
        assert!("dirichlet".parse::<Boundary>().is_err());
        assert!(LatticeGrid::new(0.1, vec![2], Boundary::Periodic).is_err());
        assert!(LatticeGrid::new(-0.1, vec![5], Boundary::Periodic).is_err());
    }

    #[test]
    fn stencil_reach_bounds_sparsity() {
        let p = MaternParams::new(std::f64::consts::PI, 1.0, 1.0, 2).unwrap();
        let spec = taylor_coefficients(p, 4);
        for n in [12usize, 24] {
            let a = assemble_precision(&spec, &grid(vec![n, n]), SymbolMode::LaplacianPower).unwrap();
            // L^4 reaches |i| + |j| ≤ 4: 41 offsets per row
            assert_eq!(a.q.nnz(), 41 * n * n);
        }
    }
}
