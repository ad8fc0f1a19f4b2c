//! Upper-triangular factors `RᵀR = Q` built by rank-one updates and
//! downdates from the rows of the signed square-root terms.
//!
//! The sparsity pattern is fixed symbolically before any arithmetic: the
//! factor of `Σ v vᵀ` lives inside the envelope of its upper triangle, so
//! column `l` of `R` is confined to rows `first(l)..=l`, where `first(l)`
//! is the smallest index of any vector touching `l`. Every intermediate
//! factor (after any prefix of the updates) fits the same envelope.

use std::fmt;
use std::io::{self, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fft::{ravel, unravel};
use crate::lattice::{PrecisionAssembly, Sign};
use crate::scalar::Real;
use crate::sparse::CsrMatrix;

/// Unknown numbering used inside the factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Ordering {
    /// Lexicographic grid order.
    #[default]
    Natural,
    /// Per axis `0, n−1, 1, n−2, …`, so periodic neighbours across the wrap
    /// stay close and the envelope is a band instead of band plus corner.
    Folded,
}

/// How the positive terms enter the factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PositiveInit {
    /// One rank-one update per row of every positive `√w·G`.
    #[default]
    RankOneUpdates,
    /// Factor the positive part directly (envelope Cholesky), then apply
    /// the downdates. Same result, far cheaper on large grids.
    Direct,
}

/// Sequence of rank-one modifications.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateOrder {
    /// All updates, then all downdates.
    #[default]
    PositivesFirst,
    /// Terms in order of `k`, each applied with its own sign. Kept to show
    /// why the default exists: a premature downdate can break down.
    Interleaved,
}

macro_rules! parse_enum {
    ($ty:ty, $($name:literal => $variant:expr),+) => {
        impl std::str::FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
                    $($name => Ok($variant),)+
                    other => Err(Error::InvalidParameters(format!(
                        "unknown {} '{other}'", stringify!($ty)
                    ))),
                }
            }
        }
    };
}

parse_enum!(Ordering, "natural" => Ordering::Natural, "folded" => Ordering::Folded);
parse_enum!(PositiveInit,
    "updates" => PositiveInit::RankOneUpdates,
    "rank_one_updates" => PositiveInit::RankOneUpdates,
    "direct" => PositiveInit::Direct);
parse_enum!(UpdateOrder,
    "positives_first" => UpdateOrder::PositivesFirst,
    "interleaved" => UpdateOrder::Interleaved);

macro_rules! display_enum {
    ($ty:ty, $($variant:path => $name:literal),+) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self {
                    $($variant => $name,)+
                })
            }
        }
    };
}

display_enum!(Ordering, Ordering::Natural => "natural", Ordering::Folded => "folded");
display_enum!(PositiveInit,
    PositiveInit::RankOneUpdates => "updates",
    PositiveInit::Direct => "direct");
display_enum!(UpdateOrder,
    UpdateOrder::PositivesFirst => "positives_first",
    UpdateOrder::Interleaved => "interleaved");

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FactorOptions {
    pub ordering: Ordering,
    pub positive_init: PositiveInit,
    pub update_order: UpdateOrder,
    /// A downdate is rejected when a pivot would drop below this fraction
    /// of its previous value.
    pub breakdown_ratio: f64,
}

impl Default for FactorOptions {
    fn default() -> Self {
        Self {
            ordering: Ordering::Natural,
            positive_init: PositiveInit::RankOneUpdates,
            update_order: UpdateOrder::PositivesFirst,
            breakdown_ratio: 1e-13,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Form {
    Plain,
    UnitDiagonal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorStats {
    pub n: usize,
    pub nnz: usize,
    pub min_diagonal: f64,
    pub max_diagonal: f64,
    pub updates: usize,
    pub downdates: usize,
    pub ordering: Ordering,
}

impl fmt::Display for FactorStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "n={} nnz={} diag=[{:e}, {:e}] updates={} downdates={} ordering={:?}",
            self.n, self.nnz, self.min_diagonal, self.max_diagonal, self.updates, self.downdates,
            self.ordering
        )
    }
}

/// Triangular factor in the (possibly permuted) internal numbering.
///
/// Plain form stores `R` with `RᵀR = PQPᵀ`; unit-diagonal form stores
/// `L = diag(R)⁻¹R` and `D = diag(R)²` so that `LᵀDL = PQPᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyFactor<T> {
    matrix: CsrMatrix<T>,
    diag: Option<Vec<T>>,
    /// `perm[internal] = original`.
    perm: Vec<usize>,
    stats: FactorStats,
}

/// One rank-one modification `± v vᵀ` with sparse `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct RankOneStep<T> {
    pub sign: Sign,
    pub vector: Vec<(usize, T)>,
    /// Difference order of the term this row came from, for diagnostics.
    pub order: Option<usize>,
}

fn folded_axis(n: usize) -> Vec<usize> {
    (0..n)
        .map(|pos| if pos % 2 == 0 { pos / 2 } else { n - 1 - pos / 2 })
        .collect()
}

fn permutation(shape: &[usize], ordering: Ordering) -> Vec<usize> {
    let total: usize = shape.iter().product();
    match ordering {
        Ordering::Natural => (0..total).collect(),
        Ordering::Folded => {
            let axes: Vec<Vec<usize>> = shape.iter().map(|&n| folded_axis(n)).collect();
            let mut pos = vec![0; shape.len()];
            let mut orig = vec![0; shape.len()];
            (0..total)
                .map(|flat| {
                    unravel(flat, shape, &mut pos);
                    for p in 0..shape.len() {
                        orig[p] = axes[p][pos[p]];
                    }
                    ravel(&orig, shape)
                })
                .collect()
        }
    }
}

/// Mutable envelope storage used while factoring.
struct Envelope<T> {
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<T>,
}

impl<T: Real> Envelope<T> {
    /// Row `j` spans the columns `j..=last[j]` with
    /// `last[j] = max{l : first[l] ≤ j}`. `last` is non-decreasing, so the
    /// tail of row `j` from column `l` is a prefix of row `l`.
    fn new(n: usize, first: &[usize]) -> Self {
        let mut last: Vec<usize> = (0..n).collect();
        for (l, &f) in first.iter().enumerate() {
            last[f] = last[f].max(l);
        }
        for j in 1..n {
            last[j] = last[j].max(last[j - 1]);
        }
        let mut indptr = Vec::with_capacity(n + 1);
        indptr.push(0);
        for (j, &l) in last.iter().enumerate() {
            indptr.push(indptr[j] + l - j + 1);
        }
        let mut indices = Vec::with_capacity(indptr[n]);
        for (j, &l) in last.iter().enumerate() {
            indices.extend(j..=l);
        }
        Self {
            values: vec![T::zero(); indices.len()],
            indptr,
            indices,
        }
    }

    fn n(&self) -> usize {
        self.indptr.len() - 1
    }

    /// Adds `sign · v vᵀ`. `w` is dense scratch (all zeros on entry and on
    /// exit) and `v` is sorted by index.
    fn rank_one(
        &mut self,
        v: &[(usize, T)],
        sign: Sign,
        ratio: T,
        w: &mut [T],
    ) -> std::result::Result<(), (usize, T, T)> {
        let Some(&(start, _)) = v.first() else {
            return Ok(());
        };
        let mut hi = start;
        for &(i, x) in v {
            w[i] = w[i] + x;
            hi = hi.max(i);
        }
        let sigma = sign.as_real::<T>();
        let mut j = start;
        let mut outcome = Ok(());
        while j <= hi {
            let wj = w[j];
            if wj == T::zero() {
                j += 1;
                continue;
            }
            let (lo, end) = (self.indptr[j], self.indptr[j + 1]);
            let rho = self.values[lo];
            if rho == T::zero() {
                if sign == Sign::Negative {
                    outcome = Err((j, rho * rho, -wj * wj));
                    break;
                }
                // empty row: it becomes ±w and absorbs the whole update
                let sg = wj.signum();
                for p in lo..end {
                    let l = self.indices[p];
                    self.values[p] = sg * w[l];
                    w[l] = T::zero();
                }
                break;
            }
            let r2 = rho * rho + sigma * wj * wj;
            if sign == Sign::Negative && !(r2 > (ratio * rho) * (ratio * rho)) {
                outcome = Err((j, rho * rho, r2));
                break;
            }
            let r = r2.sqrt();
            let c = r / rho;
            let s = wj / rho;
            self.values[lo] = r;
            w[j] = T::zero();
            for p in lo + 1..end {
                let l = self.indices[p];
                let wl = w[l];
                let updated = (self.values[p] + sigma * s * wl) / c;
                self.values[p] = updated;
                let next = c * wl - s * updated;
                w[l] = next;
                if next != T::zero() && l > hi {
                    hi = l;
                }
            }
            j += 1;
        }
        let top = hi.min(w.len() - 1);
        for x in &mut w[start..=top] {
            *x = T::zero();
        }
        outcome
    }

    /// Overwrites the stored upper triangle of `a` with its Cholesky factor.
    fn factor_in_place(&mut self) -> Result<()> {
        let n = self.n();
        for j in 0..n {
            let (lo, end) = (self.indptr[j], self.indptr[j + 1]);
            let pivot = self.values[lo];
            if !(pivot > T::zero()) {
                return Err(Error::NonPositivePivot {
                    index: j,
                    value: pivot.to_f64_lossy(),
                });
            }
            let r = pivot.sqrt();
            self.values[lo] = r;
            for p in lo + 1..end {
                self.values[p] = self.values[p] / r;
            }
            let (head, tail) = self.values.split_at_mut(end);
            let base = self.indptr[j + 1];
            for p in lo + 1..end {
                let rjl = head[p];
                if rjl == T::zero() {
                    continue;
                }
                let l = j + (p - lo);
                let dst = self.indptr[l] - base;
                let src = &head[p..end];
                for (x, &y) in tail[dst..dst + src.len()].iter_mut().zip(src) {
                    *x = *x - rjl * y;
                }
            }
        }
        Ok(())
    }

    /// Adds `w·A` for a symmetric `a` given in internal numbering.
    fn load_upper(&mut self, a: &CsrMatrix<T>) {
        for j in 0..self.n() {
            let (cols, vals) = a.row(j);
            let (mut q, end) = (self.indptr[j], self.indptr[j + 1]);
            for (&l, &v) in cols.iter().zip(vals) {
                if l < j {
                    continue;
                }
                while q < end && self.indices[q] < l {
                    q += 1;
                }
                assert!(q < end && self.indices[q] == l, "entry outside the envelope");
                self.values[q] = self.values[q] + v;
            }
        }
    }

    fn into_csr(self) -> CsrMatrix<T> {
        let n = self.n();
        CsrMatrix::from_csr_parts(n, n, self.indptr, self.indices, self.values)
    }
}

fn first_indices<T: Real, I>(n: usize, vectors: I) -> Vec<usize>
where
    I: IntoIterator<Item = Vec<(usize, T)>>,
{
    let mut first: Vec<usize> = (0..n).collect();
    for v in vectors {
        if let Some(m) = v.iter().map(|e| e.0).min() {
            for &(l, _) in &v {
                first[l] = first[l].min(m);
            }
        }
    }
    first
}

fn min_max_diagonal<T: Real>(m: &CsrMatrix<T>) -> (f64, f64) {
    m.rows().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, vals)| {
        let v = vals.first().map_or(0.0, |x| x.to_f64_lossy());
        (lo.min(v), hi.max(v))
    })
}

impl<T: Real> CholeskyFactor<T> {
    /// Factors an assembled precision matrix from its square-root terms.
    pub fn factor_by_updates(assembly: &PrecisionAssembly<T>, options: &FactorOptions) -> Result<Self> {
        if !assembly.terms.iter().any(|t| t.sign == Sign::Positive) {
            return Err(Error::InvalidParameters(
                "precision has no positive term to initialize the factor".into(),
            ));
        }
        let shape = assembly.grid.computational_shape();
        let n: usize = shape.iter().product();
        let perm = permutation(&shape, options.ordering);
        let mut inverse = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        let roots: Vec<T> = assembly.terms.iter().map(|t| t.weight.sqrt()).collect();
        let step = |term: usize, row: usize| -> Vec<(usize, T)> {
            let (cols, vals) = assembly.terms[term].g.row(row);
            let mut v: Vec<(usize, T)> = cols
                .iter()
                .zip(vals)
                .map(|(&c, &x)| (inverse[c], roots[term] * x))
                .collect();
            v.sort_by_key(|e| e.0);
            v
        };
        let all_rows = || {
            assembly
                .terms
                .iter()
                .enumerate()
                .flat_map(move |(t, term)| (0..term.g.nrows()).map(move |r| (t, r)))
        };
        let first = first_indices(n, all_rows().map(|(t, r)| step(t, r)));
        let mut env = Envelope::new(n, &first);

        let ratio = T::lit(options.breakdown_ratio);
        let mut w = vec![T::zero(); n];
        let count = |sign: Sign| all_rows().filter(|&(t, _)| assembly.terms[t].sign == sign).count();
        let (updates, downdates) = (count(Sign::Positive), count(Sign::Negative));
        let mut apply = |env: &mut Envelope<T>, t: usize, r: usize| -> Result<()> {
            let term = &assembly.terms[t];
            env.rank_one(&step(t, r), term.sign, ratio, &mut w)
                .map_err(|(pivot, before, after)| Error::DowndateBreakdown {
                    pivot,
                    order: Some(term.k),
                    row: r,
                    before: before.to_f64_lossy(),
                    after: after.to_f64_lossy(),
                })
        };

        match (options.update_order, options.positive_init) {
            (UpdateOrder::Interleaved, _) => {
                for (t, r) in all_rows() {
                    apply(&mut env, t, r)?;
                }
            }
            (UpdateOrder::PositivesFirst, PositiveInit::RankOneUpdates) => {
                for sign in [Sign::Positive, Sign::Negative] {
                    for (t, r) in all_rows().filter(|&(t, _)| assembly.terms[t].sign == sign) {
                        apply(&mut env, t, r)?;
                    }
                }
            }
            (UpdateOrder::PositivesFirst, PositiveInit::Direct) => {
                let positive = assembly
                    .terms
                    .iter()
                    .filter(|t| t.sign == Sign::Positive)
                    .map(|t| t.g.weighted_gram(t.weight))
                    .reduce(|a, b| a.add(&b))
                    .expect("at least one positive term");
                env.load_upper(&permute_symmetric(&positive, &inverse));
                env.factor_in_place()?;
                for (t, r) in all_rows().filter(|&(t, _)| assembly.terms[t].sign == Sign::Negative) {
                    apply(&mut env, t, r)?;
                }
            }
        }
        Ok(Self::finish(env, perm, options.ordering, updates, downdates))
    }

    /// Applies an explicit list of rank-one steps, in the given order and
    /// natural numbering, to an empty `n × n` factor.
    pub fn from_schedule(n: usize, steps: &[RankOneStep<T>], breakdown_ratio: f64) -> Result<Self> {
        let sorted: Vec<Vec<(usize, T)>> = steps
            .iter()
            .map(|s| {
                let mut v = s.vector.clone();
                v.sort_by_key(|e| e.0);
                v
            })
            .collect();
        if let Some(&(bad, _)) = sorted.iter().flatten().find(|e| e.0 >= n) {
            return Err(Error::DimensionMismatch { expected: n, found: bad + 1 });
        }
        let first = first_indices(n, sorted.iter().cloned());
        let mut env = Envelope::new(n, &first);
        let mut w = vec![T::zero(); n];
        let ratio = T::lit(breakdown_ratio);
        let (mut updates, mut downdates) = (0, 0);
        for (row, (step, v)) in steps.iter().zip(&sorted).enumerate() {
            match step.sign {
                Sign::Positive => updates += 1,
                Sign::Negative => downdates += 1,
            }
            env.rank_one(v, step.sign, ratio, &mut w)
                .map_err(|(pivot, before, after)| Error::DowndateBreakdown {
                    pivot,
                    order: step.order,
                    row,
                    before: before.to_f64_lossy(),
                    after: after.to_f64_lossy(),
                })?;
        }
        for j in 0..n {
            if env.values[env.indptr[j]] == T::zero() {
                return Err(Error::ZeroDiagonal(j));
            }
        }
        Ok(Self::finish(env, (0..n).collect(), Ordering::Natural, updates, downdates))
    }

    fn finish(env: Envelope<T>, perm: Vec<usize>, ordering: Ordering, updates: usize, downdates: usize) -> Self {
        let n = env.n();
        let matrix = env.into_csr();
        let (min_diagonal, max_diagonal) = min_max_diagonal(&matrix);
        let stats = FactorStats {
            n,
            nnz: matrix.nnz(),
            min_diagonal,
            max_diagonal,
            updates,
            downdates,
            ordering,
        };
        Self {
            matrix,
            diag: None,
            perm,
            stats,
        }
    }

    pub fn form(&self) -> Form {
        if self.diag.is_some() {
            Form::UnitDiagonal
        } else {
            Form::Plain
        }
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    /// `R` in plain form, `L` in unit-diagonal form (internal numbering).
    pub fn matrix(&self) -> &CsrMatrix<T> {
        &self.matrix
    }

    /// `D = diag(R)²` in unit-diagonal form.
    pub fn diagonal_weights(&self) -> Option<&[T]> {
        self.diag.as_deref()
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    pub fn stats(&self) -> &FactorStats {
        &self.stats
    }

    /// `L = diag(R)⁻¹R`, `D = diag(R)²`. Already unit-diagonal factors are
    /// returned unchanged.
    pub fn to_unit_diagonal(&self) -> Self {
        if self.diag.is_some() {
            return self.clone();
        }
        let mut triplets = Vec::with_capacity(self.matrix.nnz());
        let mut diag = Vec::with_capacity(self.n());
        for (j, (cols, vals)) in self.matrix.rows().enumerate() {
            let r = vals[0];
            diag.push(r * r);
            triplets.push((j, j, T::one()));
            for (&c, &v) in cols.iter().zip(vals).skip(1) {
                triplets.push((j, c, v / r));
            }
        }
        Self {
            matrix: CsrMatrix::from_triplets(self.n(), self.n(), triplets),
            diag: Some(diag),
            perm: self.perm.clone(),
            stats: self.stats.clone(),
        }
    }

    /// Inverse of [`to_unit_diagonal`](Self::to_unit_diagonal).
    pub fn to_plain(&self) -> Self {
        let Some(diag) = &self.diag else {
            return self.clone();
        };
        let mut m = self.matrix.clone();
        let triplets = m
            .triplets()
            .map(|(r, c, v)| (r, c, v * diag[r].sqrt()))
            .collect();
        m = CsrMatrix::from_triplets(self.n(), self.n(), triplets);
        Self {
            matrix: m,
            diag: None,
            perm: self.perm.clone(),
            stats: self.stats.clone(),
        }
    }

    fn check_len(&self, v: &[T]) -> Result<()> {
        if v.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                found: v.len(),
            });
        }
        Ok(())
    }

    /// Back substitution with the stored upper factor (`R x = v`, or
    /// `L x = v` in unit-diagonal form), internal numbering.
    pub fn solve_upper(&self, v: &[T]) -> Result<Vec<T>> {
        self.check_len(v)?;
        let mut x = v.to_vec();
        for j in (0..self.n()).rev() {
            let (cols, vals) = self.matrix.row(j);
            if cols.first() != Some(&j) || vals[0] == T::zero() {
                return Err(Error::ZeroDiagonal(j));
            }
            let mut acc = x[j];
            for (&c, &r) in cols.iter().zip(vals).skip(1) {
                acc = acc - r * x[c];
            }
            x[j] = acc / vals[0];
        }
        Ok(x)
    }

    /// Forward substitution with the transpose (`Rᵀ y = v` or `Lᵀ y = v`).
    pub fn solve_lower_transpose(&self, v: &[T]) -> Result<Vec<T>> {
        self.check_len(v)?;
        let mut y = v.to_vec();
        for j in 0..self.n() {
            let (cols, vals) = self.matrix.row(j);
            if cols.first() != Some(&j) || vals[0] == T::zero() {
                return Err(Error::ZeroDiagonal(j));
            }
            let yj = y[j] / vals[0];
            y[j] = yj;
            for (&c, &r) in cols.iter().zip(vals).skip(1) {
                y[c] = y[c] - r * yj;
            }
        }
        Ok(y)
    }

    /// Solves `Q x = b` in the original numbering.
    pub fn solve_precision(&self, b: &[T]) -> Result<Vec<T>> {
        self.check_len(b)?;
        let permuted: Vec<T> = self.perm.iter().map(|&o| b[o]).collect();
        let mut y = self.solve_lower_transpose(&permuted)?;
        if let Some(d) = &self.diag {
            for (yi, &di) in y.iter_mut().zip(d) {
                *yi = *yi / di;
            }
        }
        let x = self.solve_upper(&y)?;
        let mut out = vec![T::zero(); x.len()];
        for (new, &old) in self.perm.iter().enumerate() {
            out[old] = x[new];
        }
        Ok(out)
    }

    /// `RᵀR` (or `LᵀDL`) mapped back to the original numbering, dense and
    /// row-major. For tests and small diagnostics only.
    pub fn reconstruct_dense(&self) -> Vec<T> {
        let n = self.n();
        let plain = self.to_plain();
        let r = plain.matrix.to_dense();
        let mut out = vec![T::zero(); n * n];
        for a in 0..n {
            for b in 0..n {
                let mut s = T::zero();
                for k in 0..=a.min(b) {
                    s = s + r[k * n + a] * r[k * n + b];
                }
                out[self.perm[a] * n + self.perm[b]] = s;
            }
        }
        out
    }

    pub fn write_coordinate<W: Write>(&self, out: W) -> io::Result<()> {
        self.matrix.write_coordinate(out)
    }
}

fn permute_symmetric<T: Real>(a: &CsrMatrix<T>, inverse: &[usize]) -> CsrMatrix<T> {
    let triplets = a
        .triplets()
        .map(|(r, c, v)| (inverse[r], inverse[c], v))
        .collect();
    CsrMatrix::from_triplets(a.nrows(), a.ncols(), triplets)
}
