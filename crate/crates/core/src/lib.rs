//! Sparse Gaussian Markov random field approximations of band-limited
//! fractional Matérn fields.
//!
//! The reciprocal spectral density `(κ² + |ξ|²)^α` is replaced by its
//! truncated Taylor polynomial `Σ_k a_k κ^{2(α−k)} |ξ|^{2k}`. On a lattice
//! every monomial becomes a power of a finite-difference symbol, so the
//! precision matrix is a signed sum of sparse `GᵀG` terms. The factor is
//! built by rank-one Cholesky updates (positive terms) followed by
//! downdates (negative terms), and realizations are drawn by triangular
//! solves.
//!
//! All numerical code is generic over [`Real`] (`f32` or `f64`); the
//! `*64` aliases below fix the scalar to `f64`, which is what the CLI and
//! the experiments use.

pub mod covariance;
pub mod error;
pub mod experiment;
pub mod factor;
pub mod fft;
pub mod lattice;
pub mod quadrature;
pub mod sample;
pub mod scalar;
pub mod sparse;
pub mod specfun;
pub mod spectrum;

pub use covariance::{CovarianceKind, CovarianceQuery, QuadratureSettings, SymbolMode};
pub use error::{Error, Result};
pub use factor::{CholeskyFactor, FactorOptions, FactorStats, Ordering, PositiveInit, UpdateOrder};
pub use lattice::{Boundary, LatticeGrid, PrecisionAssembly, Sign, SparseFactorTerm};
pub use sample::{EmpiricalCovariance, FieldRealization};
pub use scalar::Real;
pub use sparse::CsrMatrix;
pub use specfun::BesselOrder;
pub use spectrum::{MaternParams, Positivity, PositivityCertificate, TaylorSpectrum};

pub type MaternParams64 = MaternParams<f64>;
pub type TaylorSpectrum64 = TaylorSpectrum<f64>;
pub type PositivityCertificate64 = PositivityCertificate<f64>;
pub type LatticeGrid64 = LatticeGrid<f64>;
pub type PrecisionAssembly64 = PrecisionAssembly<f64>;
pub type CholeskyFactor64 = CholeskyFactor<f64>;
pub type FieldRealization64 = FieldRealization<f64>;
pub type QuadratureSettings64 = QuadratureSettings<f64>;

pub type MaternParams32 = MaternParams<f32>;
pub type TaylorSpectrum32 = TaylorSpectrum<f32>;
pub type LatticeGrid32 = LatticeGrid<f32>;
pub type CholeskyFactor32 = CholeskyFactor<f32>;
