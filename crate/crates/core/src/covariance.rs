//! The five covariance functions compared by the experiments.
//!
//! All are stationary; callers pass lags `x − y`. The continuous ones are
//! Fourier integrals of a reciprocal spectrum:
//!
//! | kind          | domain            | reciprocal spectrum                 |
//! |---------------|-------------------|-------------------------------------|
//! | exact         | ℝ^d               | `(κ² + |ξ|²)^α`                     |
//! | band-limited  | `|ξ| ≤ κ`         | `(κ² + |ξ|²)^α`                     |
//! | taylor        | ℝ^d               | `Σ_k c_k |ξ|^{2k}`                  |
//! | interpolated  | `(−π/h, π/h)^d`   | `Σ_k c_k h^{−2k} S_k(hξ)`           |
//!
//! and the discrete covariance is the lattice version of the last row on
//! `(−π, π)^d`, evaluated by a Riemann sum over DFT frequencies.

use std::cell::Cell;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex;
use rustfft::FftDirection;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fft::{fft_nd, frequency, unravel};
use crate::quadrature::{self, RadialOptions};
use crate::scalar::Real;
use crate::specfun::{gamma, scaled_bessel_k, BesselOrder};
use crate::spectrum::{MaternParams, Positivity, TaylorSpectrum};

/// How `|ξ|^{2k}` is discretized on the lattice for `d ≥ 2`:
/// `Σ_p (2 − 2cos ξ_p)^k` (separable) or `(Σ_p (2 − 2cos ξ_p))^k`
/// (Laplacian power). The two coincide for `d = 1` and for `k ≤ 1`; the
/// `k = 0` term is the identity in both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SymbolMode {
    Separable,
    LaplacianPower,
}

impl SymbolMode {
    pub fn default_for(d: usize) -> Self {
        if d == 1 {
            SymbolMode::Separable
        } else {
            SymbolMode::LaplacianPower
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            SymbolMode::Separable => "separable",
            SymbolMode::LaplacianPower => "laplacian_power",
        }
    }
}

impl fmt::Display for SymbolMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SymbolMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "separable" => Ok(SymbolMode::Separable),
            "laplacian_power" | "laplacian" => Ok(SymbolMode::LaplacianPower),
            other => Err(Error::InvalidParameters(format!("unknown symbol mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CovarianceKind {
    Exact,
    BandLimited,
    Taylor,
    Discrete,
    Interpolated,
}

impl CovarianceKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CovarianceKind::Exact => "exact",
            CovarianceKind::BandLimited => "band_limited",
            CovarianceKind::Taylor => "taylor",
            CovarianceKind::Discrete => "discrete",
            CovarianceKind::Interpolated => "interpolated",
        }
    }
}

impl fmt::Display for CovarianceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CovarianceKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "exact" | "matern" => Ok(CovarianceKind::Exact),
            "band_limited" | "bandlimited" => Ok(CovarianceKind::BandLimited),
            "taylor" => Ok(CovarianceKind::Taylor),
            "discrete" => Ok(CovarianceKind::Discrete),
            "interpolated" => Ok(CovarianceKind::Interpolated),
            other => Err(Error::InvalidParameters(format!("unknown covariance kind '{other}'"))),
        }
    }
}

/// Accuracy controls. Radii are in units of `κ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureSettings<T> {
    pub rel_tol: T,
    pub abs_tol: T,
    /// First truncation radius for integrals over ℝ^d; doubled until two
    /// consecutive shells change the value by less than the tolerance.
    pub outer_radius: T,
    pub max_outer_radius: T,
    /// Subintervals allowed per adaptive panel.
    pub max_intervals: usize,
    /// Minimum trapezoid nodes for the angular (J₀) integral in d = 2.
    pub angular_points: usize,
    /// Frequency points per axis for lattice Riemann sums; `None` picks
    /// 1024 (d = 1), 512 (d = 2) or 64 (d = 3).
    pub lattice_points: Option<usize>,
}

impl<T: Real> Default for QuadratureSettings<T> {
    fn default() -> Self {
        Self {
            rel_tol: T::lit(1e-10),
            abs_tol: T::lit(1e-14),
            outer_radius: T::lit(16.0),
            max_outer_radius: T::lit(65_536.0),
            max_intervals: 400,
            angular_points: 32,
            lattice_points: None,
        }
    }
}

impl<T: Real> QuadratureSettings<T> {
    pub fn lattice_points_for(&self, d: usize) -> usize {
        self.lattice_points.unwrap_or(match d {
            1 => 1024,
            2 => 512,
            _ => 64,
        })
    }

    fn radial(&self, kappa: T) -> RadialOptions<T> {
        RadialOptions {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            panel_width: kappa,
            angular_points: self.angular_points,
            max_intervals: self.max_intervals,
        }
    }
}

fn norm<T: Real>(lag: &[T]) -> T {
    lag.iter().map(|&x| x * x).sum::<T>().sqrt()
}

fn check_lag_dim<T: Real>(lag: &[T], d: usize) -> Result<()> {
    if lag.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: lag.len(),
        });
    }
    Ok(())
}

fn fourier_prefactor<T: Real>(sigma2: T, d: usize) -> T {
    sigma2 / (T::lit(2.0) * T::PI()).powi(d as i32)
}

/// Isotropic Matérn covariance at lag magnitude `r`:
/// `σ² 2^{1−ν} (κr)^ν K_ν(κr) / ((4π)^{d/2} Γ(α) κ^{2ν})`,
/// the closed form of `σ²/(2π)^d ∫ e^{−i x·ξ} (κ² + |ξ|²)^{−α} dξ`.
pub fn exact_matern<T: Real>(params: &MaternParams<T>, r: T) -> Result<T> {
    if !(r >= T::zero()) || !r.is_finite() {
        return Err(Error::Domain {
            function: "exact_matern",
            value: r.to_f64_lossy(),
            reason: "lag magnitude must be finite and non-negative",
        });
    }
    let nu = params.nu();
    let kappa = params.kappa();
    let d = T::from_usize_lossy(params.d());
    let four_pi = T::lit(4.0) * T::PI();
    let prefactor = params.sigma2() * T::lit(2.0).powf(T::one() - nu)
        / (four_pi.powf(d / T::lit(2.0)) * gamma(params.alpha())? * kappa.powf(T::lit(2.0) * nu));
    let z = kappa * r;
    // far tail: K_ν underflows long before the product matters
    if z > T::lit(700.0) {
        return Ok(T::zero());
    }
    Ok(prefactor * scaled_bessel_k(BesselOrder::new(nu)?, z)?)
}

/// The same covariance computed directly from its spectral integral.
pub fn exact_matern_spectral<T: Real>(
    params: &MaternParams<T>,
    r: T,
    settings: &QuadratureSettings<T>,
) -> Result<T> {
    let kappa = params.kappa();
    let alpha = params.alpha();
    let f = |rho: T| (kappa * kappa + rho * rho).powf(-alpha);
    let est = quadrature::radial_transform_to_infinity(
        params.d(),
        r,
        &f,
        settings.outer_radius * kappa,
        settings.max_outer_radius * kappa,
        &settings.radial(kappa),
    )?;
    Ok(fourier_prefactor(params.sigma2(), params.d()) * est.value)
}

/// Largest relative gap between the closed form and the spectral integral
/// at `r ∈ {0.5, 1, 2}`; callers compare it against their tolerance before
/// trusting [`exact_matern`].
pub fn verify_closed_form<T: Real>(
    params: &MaternParams<T>,
    settings: &QuadratureSettings<T>,
) -> Result<T> {
    let mut worst = T::zero();
    for r in [0.5, 1.0, 2.0] {
        let r = T::lit(r);
        let closed = exact_matern(params, r)?;
        let spectral = exact_matern_spectral(params, r, settings)?;
        worst = worst.max(((closed - spectral) / spectral).abs());
    }
    Ok(worst)
}

/// Covariance of the band-limited field: the Matérn spectral integral
/// restricted to the ball `|ξ| ≤ κ`.
pub fn band_limited<T: Real>(
    params: &MaternParams<T>,
    lag: &[T],
    settings: &QuadratureSettings<T>,
) -> Result<T> {
    check_lag_dim(lag, params.d())?;
    let kappa = params.kappa();
    let alpha = params.alpha();
    let f = |rho: T| (kappa * kappa + rho * rho).powf(-alpha);
    let est = quadrature::radial_transform(
        params.d(),
        norm(lag),
        &f,
        T::zero(),
        kappa,
        &settings.radial(kappa),
    )?;
    Ok(fourier_prefactor(params.sigma2(), params.d()) * est.value)
}

/// Covariance with reciprocal spectrum `Σ_k c_k |ξ|^{2k}` over all of ℝ^d.
/// Requires a spectrum that is positive everywhere.
pub fn taylor_covariance<T: Real>(
    spec: &TaylorSpectrum<T>,
    lag: &[T],
    settings: &QuadratureSettings<T>,
) -> Result<T> {
    spec.require_positive_everywhere()?;
    let params = spec.params();
    check_lag_dim(lag, params.d())?;
    let kappa = params.kappa();
    let f = |rho: T| T::one() / spec.evaluate(rho);
    let est = quadrature::radial_transform_to_infinity(
        params.d(),
        norm(lag),
        &f,
        settings.outer_radius * kappa,
        settings.max_outer_radius * kappa,
        &settings.radial(kappa),
    )?;
    Ok(fourier_prefactor(params.sigma2(), params.d()) * est.value)
}

/// Truncated-Taylor covariance integrated over `|ξ| ≤ radius` only, for
/// spectra that are positive on a ball but not everywhere.
pub fn taylor_covariance_on_ball<T: Real>(
    spec: &TaylorSpectrum<T>,
    lag: &[T],
    radius: T,
    settings: &QuadratureSettings<T>,
) -> Result<T> {
    let params = spec.params();
    check_lag_dim(lag, params.d())?;
    let limit = match spec.positivity() {
        Positivity::PositiveEverywhere => T::infinity(),
        Positivity::PositiveOnBall { radius } => radius,
        Positivity::Invalid => T::zero(),
    };
    if !(radius > T::zero()) || radius >= limit {
        return Err(Error::InvalidParameters(format!(
            "integration radius {radius} must lie inside the positive ball ({})",
            spec.positivity()
        )));
    }
    let kappa = params.kappa();
    let f = |rho: T| T::one() / spec.evaluate(rho);
    let est = quadrature::radial_transform(
        params.d(),
        norm(lag),
        &f,
        T::zero(),
        radius,
        &settings.radial(kappa),
    )?;
    Ok(fourier_prefactor(params.sigma2(), params.d()) * est.value)
}

/// Lattice symbol `D(ξ) = (h^d/σ²) Σ_k c_k h^{−2k} S_k(ξ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSymbol<T> {
    coeffs: Vec<T>,
    h: T,
    lattice_scale: T,
    sigma2: T,
    d: usize,
    mode: SymbolMode,
}

impl<T: Real> DiscreteSymbol<T> {
    pub fn new(spec: &TaylorSpectrum<T>, h: T, mode: SymbolMode) -> Result<Self> {
        if !(h > T::zero()) || !h.is_finite() {
            return Err(Error::InvalidParameters(format!("lattice step h = {h} must be positive")));
        }
        let inv_h2 = T::one() / (h * h);
        let mut scale = T::one();
        let coeffs = spec
            .scaled()
            .iter()
            .map(|&c| {
                let v = c * scale;
                scale = scale * inv_h2;
                v
            })
            .collect();
        let d = spec.params().d();
        Ok(Self {
            coeffs,
            h,
            lattice_scale: h.powi(d as i32),
            sigma2: spec.params().sigma2(),
            d,
            mode,
        })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// `Σ_k c_k h^{−2k} S_k` from the per-axis values `s_p = 2 − 2cos ξ_p`.
    pub fn polynomial(&self, s: &[T]) -> T {
        match self.mode {
            SymbolMode::LaplacianPower => {
                let total: T = s.iter().copied().sum();
                self.coeffs.iter().rev().fold(T::zero(), |acc, &c| acc * total + c)
            }
            SymbolMode::Separable => {
                let mut acc = self.coeffs[0];
                for &sp in s {
                    // Σ_{k≥1} c_k h^{−2k} s_p^k
                    let tail = self.coeffs[1..]
                        .iter()
                        .rev()
                        .fold(T::zero(), |a, &c| a * sp + c);
                    acc = acc + tail * sp;
                }
                acc
            }
        }
    }

    /// Full lattice multiplier `D(ξ)` including `h^d/σ²`.
    pub fn lattice(&self, s: &[T]) -> T {
        self.lattice_scale / self.sigma2 * self.polynomial(s)
    }

    /// Rescaled symbol at a continuous frequency `η ∈ (−π/h, π/h)^d`.
    pub fn rescaled(&self, eta: &[T]) -> T {
        let s: Vec<T> = eta
            .iter()
            .map(|&e| T::lit(2.0) - T::lit(2.0) * (self.h * e).cos())
            .collect();
        self.polynomial(&s)
    }
}

fn symbol_on_grid<T: Real>(symbol: &DiscreteSymbol<T>, shape: &[usize]) -> Result<Vec<T>> {
    let d = shape.len();
    let axis_s: Vec<Vec<T>> = shape
        .iter()
        .map(|&n| {
            (0..n)
                .map(|m| T::lit(2.0) - T::lit(2.0) * frequency::<T>(m, n).cos())
                .collect()
        })
        .collect();
    let total: usize = shape.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0; d];
    let mut s = vec![T::zero(); d];
    for flat in 0..total {
        unravel(flat, shape, &mut idx);
        for p in 0..d {
            s[p] = axis_s[p][idx[p]];
        }
        let v = symbol.lattice(&s);
        if !(v > T::zero()) || !v.is_finite() {
            let xi = idx
                .iter()
                .zip(shape)
                .map(|(&m, &n)| frequency::<f64>(m, n))
                .collect();
            return Err(Error::NonPositiveSymbol {
                xi,
                value: v.to_f64_lossy(),
            });
        }
        out.push(v);
    }
    Ok(out)
}

/// Lattice covariance at integer lag `i − j`, as a Riemann sum of the
/// inverse Fourier integral over `N^d` DFT frequencies. The sum equals the
/// covariance periodized with period `N`, which is exponentially close to
/// the infinite-lattice value when `N·h` spans many correlation lengths.
pub fn discrete_covariance<T: Real>(
    spec: &TaylorSpectrum<T>,
    h: T,
    lag_index: &[i64],
    mode: SymbolMode,
    settings: &QuadratureSettings<T>,
) -> Result<T> {
    let d = spec.params().d();
    if lag_index.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: lag_index.len(),
        });
    }
    let symbol = DiscreteSymbol::new(spec, h, mode)?;
    let n = settings.lattice_points_for(d);
    let shape = vec![n; d];
    let values = symbol_on_grid(&symbol, &shape)?;
    // per-axis phase factors cos/sin(i_p ξ_m)
    let phases: Vec<Vec<Complex<T>>> = lag_index
        .iter()
        .map(|&i| {
            (0..n)
                .map(|m| {
                    let arg = frequency::<T>(m, n) * T::lit(i as f64);
                    Complex::new(arg.cos(), -arg.sin())
                })
                .collect()
        })
        .collect();
    let mut idx = vec![0; d];
    let mut acc = T::zero();
    for (flat, &v) in values.iter().enumerate() {
        unravel(flat, &shape, &mut idx);
        let mut phase = Complex::new(T::one(), T::zero());
        for p in 0..d {
            phase = phase * phases[p][idx[p]];
        }
        acc = acc + phase.re / v;
    }
    Ok(acc / T::from_usize_lossy(values.len()))
}

/// Every lag of the lattice covariance on a periodic grid of the given
/// shape, by one inverse FFT. Entry `idx` holds the lag `idx` (mod shape);
/// this is exactly a row of the inverse of the periodic precision matrix.
pub fn discrete_covariance_field<T: Real>(
    spec: &TaylorSpectrum<T>,
    h: T,
    shape: &[usize],
    mode: SymbolMode,
) -> Result<Vec<T>> {
    let d = spec.params().d();
    if shape.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: shape.len(),
        });
    }
    let symbol = DiscreteSymbol::new(spec, h, mode)?;
    let values = symbol_on_grid(&symbol, shape)?;
    let total = values.len();
    let mut data: Vec<Complex<T>> = values
        .into_iter()
        .map(|v| Complex::new(T::one() / v, T::zero()))
        .collect();
    fft_nd(&mut data, shape, FftDirection::Inverse);
    let norm = T::from_usize_lossy(total);
    Ok(data.into_iter().map(|c| c.re / norm).collect())
}

/// Whittaker–Shannon interpolation of the lattice covariance to a real
/// lag, computed as `σ²/π^d ∫_{[0, π/h]^d} Π_p cos(x_p η_p) / D_h(η) dη`.
/// At `x = h·i` this reproduces [`discrete_covariance`].
pub fn interpolated_covariance<T: Real>(
    spec: &TaylorSpectrum<T>,
    h: T,
    lag: &[T],
    mode: SymbolMode,
    settings: &QuadratureSettings<T>,
) -> Result<T> {
    let params = spec.params();
    let d = params.d();
    check_lag_dim(lag, d)?;
    let symbol = DiscreteSymbol::new(spec, h, mode)?;
    let upper = T::PI() / h;
    // positivity of the rescaled symbol on a coarse audit of the box
    let audit = 64usize;
    let mut eta = vec![T::zero(); d];
    let mut idx = vec![0; d];
    for flat in 0..audit.pow(d as u32) {
        unravel(flat, &vec![audit; d], &mut idx);
        for p in 0..d {
            eta[p] = upper * T::from_usize_lossy(idx[p]) / T::from_usize_lossy(audit - 1);
        }
        let v = symbol.rescaled(&eta);
        if !(v > T::zero()) {
            return Err(Error::NonPositiveSymbol {
                xi: eta.iter().map(|&e| (e * h).to_f64_lossy()).collect(),
                value: v.to_f64_lossy(),
            });
        }
    }
    let failure = Cell::new(None);
    let value = nested_cosine_integral(
        lag,
        upper,
        &|eta: &[T]| T::one() / symbol.rescaled(eta),
        &mut Vec::with_capacity(d),
        settings,
        params.kappa(),
        &failure,
    );
    if let Some(err) = failure.into_inner() {
        return Err(err);
    }
    Ok(params.sigma2() / T::PI().powi(d as i32) * value)
}

/// `∫_{[0, upper]^d} Π_p cos(lag_p η_p) f(η) dη` by nested adaptive rules.
fn nested_cosine_integral<T: Real>(
    lag: &[T],
    upper: T,
    f: &dyn Fn(&[T]) -> T,
    prefix: &mut Vec<T>,
    settings: &QuadratureSettings<T>,
    kappa: T,
    failure: &Cell<Option<Error>>,
) -> T {
    let axis = prefix.len();
    if axis == lag.len() {
        return f(prefix);
    }
    let x = lag[axis].abs();
    let base = prefix.clone();
    let integrand = |eta: T| {
        let mut coords = base.clone();
        coords.push(eta);
        (x * eta).cos() * nested_cosine_integral(lag, upper, f, &mut coords, settings, kappa, failure)
    };
    let mut width = kappa.max(upper / T::lit(64.0));
    if x > T::zero() {
        width = width.min(T::PI() / x);
    }
    let panels = (upper / width).ceil().to_usize().unwrap_or(1).max(1);
    let step = upper / T::from_usize_lossy(panels);
    let mut total = T::zero();
    for i in 0..panels {
        let lo = step * T::from_usize_lossy(i);
        let hi = if i + 1 == panels {
            upper
        } else {
            step * T::from_usize_lossy(i + 1)
        };
        match quadrature::integrate(
            &integrand,
            lo,
            hi,
            settings.rel_tol,
            settings.abs_tol / T::from_usize_lossy(panels),
            settings.max_intervals,
        ) {
            Ok(est) => total = total + est.value,
            Err(e) => {
                failure.set(Some(e));
                return T::nan();
            }
        }
    }
    prefix.truncate(axis);
    total
}

/// A single covariance evaluation, dispatched on [`CovarianceKind`].
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceQuery<T> {
    pub kind: CovarianceKind,
    /// Lag `x − y` in length units. For [`CovarianceKind::Discrete`] every
    /// coordinate must be an integer multiple of `h`.
    pub lag: Vec<T>,
    pub spectrum: TaylorSpectrum<T>,
    pub h: Option<T>,
    pub mode: SymbolMode,
}

impl<T: Real> CovarianceQuery<T> {
    pub fn evaluate(&self, settings: &QuadratureSettings<T>) -> Result<T> {
        let params = self.spectrum.params();
        let step = || {
            self.h.ok_or_else(|| {
                Error::InvalidParameters(format!("kind '{}' needs a lattice step h", self.kind))
            })
        };
        match self.kind {
            CovarianceKind::Exact => {
                check_lag_dim(&self.lag, params.d())?;
                exact_matern(params, norm(&self.lag))
            }
            CovarianceKind::BandLimited => band_limited(params, &self.lag, settings),
            CovarianceKind::Taylor => taylor_covariance(&self.spectrum, &self.lag, settings),
            CovarianceKind::Discrete => {
                let h = step()?;
                let index = lattice_index(&self.lag, h)?;
                discrete_covariance(&self.spectrum, h, &index, self.mode, settings)
            }
            CovarianceKind::Interpolated => {
                interpolated_covariance(&self.spectrum, step()?, &self.lag, self.mode, settings)
            }
        }
    }
}

/// Integer multi-index `lag/h`, rejecting lags off the lattice.
pub fn lattice_index<T: Real>(lag: &[T], h: T) -> Result<Vec<i64>> {
    lag.iter()
        .map(|&x| {
            let q = x / h;
            let r = q.round();
            if (q - r).abs() > T::lit(1e-9) * q.abs().max(T::one()) {
                Err(Error::InvalidParameters(format!(
                    "lag {x} is not a multiple of h = {h}"
                )))
            } else {
                Ok(r.to_i64().unwrap_or(0))
            }
        })
        .collect()
}
