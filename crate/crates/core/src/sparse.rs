//! Compressed sparse row matrices with deterministic (sorted) ordering.

use std::io::{self, Write};

use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<T>,
}

impl<T: Real> CsrMatrix<T> {
    /// Sums duplicate entries and drops explicit zeros.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, T)>) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0; nrows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<T> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            assert!(r < nrows && c < ncols, "entry ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                let top = values.len() - 1;
                values[top] = values[top] + v;
            } else {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..nrows {
            indptr[i + 1] += indptr[i];
        }
        let mut m = Self {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        };
        m.prune();
        m
    }

    /// Builds from per-row sorted `(col, value)` lists.
    pub fn from_rows(ncols: usize, rows: Vec<Vec<(usize, T)>>) -> Self {
        let nrows = rows.len();
        let mut triplets = Vec::new();
        for (r, row) in rows.into_iter().enumerate() {
            for (c, v) in row {
                triplets.push((r, c, v));
            }
        }
        Self::from_triplets(nrows, ncols, triplets)
    }

    /// Takes ownership of compressed rows whose column indices are already
    /// sorted and unique; explicit zeros are dropped.
    pub fn from_csr_parts(
        nrows: usize,
        ncols: usize,
        indptr: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<T>,
    ) -> Self {
        assert_eq!(indptr.len(), nrows + 1);
        assert_eq!(indices.len(), values.len());
        assert_eq!(indptr[nrows], indices.len());
        debug_assert!((0..nrows).all(|r| indices[indptr[r]..indptr[r + 1]]
            .windows(2)
            .all(|w| w[0] < w[1])));
        let mut m = Self {
            nrows,
            ncols,
            indptr,
            indices,
            values,
        };
        m.prune();
        m
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![T::one(); n],
        }
    }

    fn prune(&mut self) {
        if self.values.iter().all(|&v| v != T::zero()) {
            return;
        }
        let mut indptr = vec![0; self.nrows + 1];
        let mut indices = Vec::with_capacity(self.indices.len());
        let mut values = Vec::with_capacity(self.values.len());
        for r in 0..self.nrows {
            for p in self.indptr[r]..self.indptr[r + 1] {
                if self.values[p] != T::zero() {
                    indices.push(self.indices[p]);
                    values.push(self.values[p]);
                }
            }
            indptr[r + 1] = indices.len();
        }
        self.indptr = indptr;
        self.indices = indices;
        self.values = values;
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[T]) {
        let span = self.indptr[r]..self.indptr[r + 1];
        (&self.indices[span.clone()], &self.values[span])
    }

    pub fn rows(&self) -> impl Iterator<Item = (&[usize], &[T])> + '_ {
        (0..self.nrows).map(move |r| self.row(r))
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        let (cols, vals) = self.row(r);
        cols.binary_search(&c).map_or(T::zero(), |p| vals[p])
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.nrows).flat_map(move |r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).map(move |(&c, &v)| (r, c, v))
        })
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.ncols);
        self.rows()
            .map(|(cols, vals)| cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum())
            .collect()
    }

    pub fn scale(&mut self, s: T) {
        for v in &mut self.values {
            *v = *v * s;
        }
    }

    /// `Σ_i w · g_i g_iᵀ` over the rows `g_i` of `self`, i.e. `w·GᵀG`.
    pub fn weighted_gram(&self, w: T) -> Self {
        let mut triplets = Vec::new();
        for (cols, vals) in self.rows() {
            for (&a, &va) in cols.iter().zip(vals) {
                for (&b, &vb) in cols.iter().zip(vals) {
                    triplets.push((a, b, w * va * vb));
                }
            }
        }
        Self::from_triplets(self.ncols, self.ncols, triplets)
    }

    /// Entrywise sum; shapes must agree.
    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let triplets = self.triplets().chain(other.triplets()).collect();
        Self::from_triplets(self.nrows, self.ncols, triplets)
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.nrows * self.ncols];
        for (r, c, v) in self.triplets() {
            out[r * self.ncols + c] = v;
        }
        out
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        self.nrows == self.ncols
            && self
                .triplets()
                .all(|(r, c, v)| (v - self.get(c, r)).abs() <= tol * v.abs().max(T::one()))
    }

    /// Largest `|i − j|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        self.triplets().map(|(r, c, _)| r.abs_diff(c)).max().unwrap_or(0)
    }

    /// Coordinate text: a `# rows cols nnz` header, then `row col value`
    /// per line (zero-based).
    pub fn write_coordinate<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "# {} {} {}", self.nrows, self.ncols, self.nnz())?;
        for (r, c, v) in self.triplets() {
            writeln!(out, "{r} {c} {v:e}")?;
        }
        Ok(())
    }
}
