//! Taylor expansion of `P(t) = (κ² + t²)^α` and positivity analysis of its
//! truncations.
//!
//! `P(t) = Σ_k a_k κ^{2(α−k)} t^{2k}` with the generalized binomial
//! coefficients `a_k = α(α−1)···(α−k+1)/k!`. The series only converges for
//! `|t| ≤ κ`, so a truncation is a usable reciprocal spectral density only
//! if it stays positive. Two facts drive the rules below: `a_k > 0` for
//! `k ≤ ⌊α⌋+1`, and past that the signs alternate, so orders of the form
//! `K = ⌊α⌋ + 2J + 1` end on a positive coefficient and admit the grouping
//! into non-negative polynomials `q_0, …, q_J` built by
//! [`lemma_decomposition`].

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Continuous Matérn model: smoothness `α`, inverse length `κ`, scale `σ²`
/// and dimension `d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MaternParams<T> {
    alpha: T,
    kappa: T,
    sigma2: T,
    d: usize,
}

impl<T: Real> MaternParams<T> {
    pub fn new(alpha: T, kappa: T, sigma2: T, d: usize) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(Error::InvalidParameters(format!(
                "dimension d = {d} not supported (1 ≤ d ≤ 3)"
            )));
        }
        let finite = alpha.is_finite() && kappa.is_finite() && sigma2.is_finite();
        if !finite {
            return Err(Error::InvalidParameters("non-finite parameter".into()));
        }
        if alpha <= T::from_usize_lossy(d) / T::lit(2.0) {
            return Err(Error::InvalidParameters(format!(
                "alpha = {alpha} must exceed d/2 = {}",
                d as f64 / 2.0
            )));
        }
        if kappa <= T::zero() {
            return Err(Error::InvalidParameters(format!("kappa = {kappa} must be positive")));
        }
        if sigma2 <= T::zero() {
            return Err(Error::InvalidParameters(format!("sigma2 = {sigma2} must be positive")));
        }
        Ok(Self {
            alpha,
            kappa,
            sigma2,
            d,
        })
    }

    /// Parameterization by correlation length, `κ = ℓ^{−d}`.
    pub fn from_correlation_length(alpha: T, length: T, sigma2: T, d: usize) -> Result<Self> {
        if length <= T::zero() || !length.is_finite() {
            return Err(Error::InvalidParameters(format!(
                "correlation length {length} must be positive"
            )));
        }
        Self::new(alpha, length.powi(-(d as i32)), sigma2, d)
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn kappa(&self) -> T {
        self.kappa
    }

    pub fn sigma2(&self) -> T {
        self.sigma2
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Bessel order `ν = α − d/2 > 0`.
    pub fn nu(&self) -> T {
        self.alpha - T::from_usize_lossy(self.d) / T::lit(2.0)
    }

    pub fn correlation_length(&self) -> T {
        self.kappa.powf(-T::one() / T::from_usize_lossy(self.d))
    }

    /// `⌊α⌋`.
    pub fn integer_part(&self) -> usize {
        self.alpha.floor().to_usize().unwrap_or(0)
    }
}

/// Where a truncated spectrum is known to be strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Positivity<T> {
    PositiveEverywhere,
    /// Positive for `|t| < radius`, with the first root at `radius`.
    PositiveOnBall { radius: T },
    Invalid,
}

impl<T: Real> Positivity<T> {
    pub fn is_positive_everywhere(&self) -> bool {
        matches!(self, Positivity::PositiveEverywhere)
    }
}

impl<T: Real> std::fmt::Display for Positivity<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Positivity::PositiveEverywhere => write!(f, "positive_everywhere"),
            Positivity::PositiveOnBall { radius } => write!(f, "positive_on_ball({radius})"),
            Positivity::Invalid => write!(f, "invalid"),
        }
    }
}

/// Audit grid used by positivity checks: `points` equispaced radii on
/// `[0, radius_factor·κ]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditGrid<T> {
    pub radius_factor: T,
    pub points: usize,
}

impl<T: Real> Default for AuditGrid<T> {
    fn default() -> Self {
        Self {
            radius_factor: T::lit(100.0),
            points: 10_000,
        }
    }
}

/// Truncated Taylor expansion of the fractional spectrum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaylorSpectrum<T> {
    params: MaternParams<T>,
    order: usize,
    a: Vec<T>,
    c: Vec<T>,
    positivity: Positivity<T>,
}

/// Raw coefficients `a_0..=a_K` by the ratio recurrence
/// `a_k = a_{k−1} (α − k + 1) / k`, which never forms a factorial.
pub fn raw_coefficients<T: Real>(alpha: T, order: usize) -> Vec<T> {
    let mut a = Vec::with_capacity(order + 1);
    a.push(T::one());
    for k in 1..=order {
        let fk = T::from_usize_lossy(k);
        let next = a[k - 1] * (alpha - T::from_usize_lossy(k - 1)) / fk;
        a.push(next);
    }
    a
}

/// Builds the order-`K` spectrum and classifies it on the default audit grid.
pub fn taylor_coefficients<T: Real>(params: MaternParams<T>, order: usize) -> TaylorSpectrum<T> {
    let a = raw_coefficients(params.alpha(), order);
    let two_alpha = T::lit(2.0) * params.alpha();
    let log_kappa = params.kappa().ln();
    let c = a
        .iter()
        .enumerate()
        .map(|(k, &ak)| ak * ((two_alpha - T::from_usize_lossy(2 * k)) * log_kappa).exp())
        .collect();
    let mut spec = TaylorSpectrum {
        params,
        order,
        a,
        c,
        positivity: Positivity::Invalid,
    };
    spec.positivity = check_positivity(&spec, AuditGrid::default());
    spec
}

/// `K = ⌊α⌋ + 2J + 1`, the order that carries the positivity certificate.
pub fn select_order<T: Real>(params: &MaternParams<T>, depth: usize) -> Result<usize> {
    if depth == 0 {
        return Err(Error::InvalidParameters("expansion depth J must be ≥ 1".into()));
    }
    Ok(params.integer_part() + 2 * depth + 1)
}

/// True when the leading coefficient `a_K` is strictly positive.
pub fn has_positive_leading_coefficient<T: Real>(params: &MaternParams<T>, order: usize) -> bool {
    raw_coefficients(params.alpha(), order)
        .last()
        .is_some_and(|&a| a > T::zero())
}

/// Orders `K ≤ max_order` with `a_K > 0`; a superset of the
/// `⌊α⌋ + 2J + 1` family.
pub fn positive_leading_orders<T: Real>(params: &MaternParams<T>, max_order: usize) -> Vec<usize> {
    raw_coefficients(params.alpha(), max_order)
        .iter()
        .enumerate()
        .filter(|(_, &a)| a > T::zero())
        .map(|(k, _)| k)
        .collect()
}

impl<T: Real> TaylorSpectrum<T> {
    pub fn params(&self) -> &MaternParams<T> {
        &self.params
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn raw(&self) -> &[T] {
        &self.a
    }

    /// `c_k = a_k κ^{2(α−k)}`.
    pub fn scaled(&self) -> &[T] {
        &self.c
    }

    pub fn positivity(&self) -> Positivity<T> {
        self.positivity
    }

    /// Re-classifies on a custom audit grid.
    pub fn with_audit(mut self, grid: AuditGrid<T>) -> Self {
        self.positivity = check_positivity(&self, grid);
        self
    }

    /// `Σ_k c_k t^{2k}`.
    pub fn evaluate(&self, t: T) -> T {
        horner(&self.c, t * t)
    }

    /// Exact fractional spectrum `(κ² + t²)^α`.
    pub fn exact(&self, t: T) -> T {
        let k = self.params.kappa();
        (k * k + t * t).powf(self.params.alpha())
    }

    pub fn require_positive_everywhere(&self) -> Result<()> {
        if self.positivity.is_positive_everywhere() {
            Ok(())
        } else {
            Err(Error::NotPositiveEverywhere {
                order: self.order,
                positivity: self.positivity.to_string(),
            })
        }
    }

    /// Coefficient that decides the sign at infinity: the last non-zero
    /// `a_k` (integer `α` terminates the expansion with exact zeros).
    fn leading(&self) -> T {
        self.a
            .iter()
            .rev()
            .copied()
            .find(|&a| a != T::zero())
            .unwrap_or_else(T::one)
    }
}

fn horner<T: Real>(coeffs: &[T], s: T) -> T {
    coeffs.iter().rev().fold(T::zero(), |acc, &c| acc * s + c)
}

/// Classifies a truncation by its leading sign plus a dense audit grid.
///
/// With a negative leading coefficient the polynomial must cross zero; the
/// first crossing is located on the grid (extending it if needed) and
/// refined by bisection.
pub fn check_positivity<T: Real>(spec: &TaylorSpectrum<T>, grid: AuditGrid<T>) -> Positivity<T> {
    let kappa = spec.params.kappa();
    let radius = grid.radius_factor.max(T::one()) * kappa;
    let points = grid.points.max(2);
    let step = radius / T::from_usize_lossy(points - 1);
    let leading = spec.leading();

    let mut prev = T::zero();
    for i in 0..points {
        let t = step * T::from_usize_lossy(i);
        let v = spec.evaluate(t);
        if v <= T::zero() || !v.is_finite() {
            if leading > T::zero() || i == 0 {
                return Positivity::Invalid;
            }
            return Positivity::PositiveOnBall {
                radius: bisect_root(spec, prev, t),
            };
        }
        prev = t;
    }
    if leading > T::zero() {
        return Positivity::PositiveEverywhere;
    }
    // negative leading term: the root lies beyond the audit radius
    let mut lo = radius;
    let mut hi = radius * T::lit(2.0);
    while spec.evaluate(hi) > T::zero() {
        lo = hi;
        hi = hi * T::lit(2.0);
        if !hi.is_finite() {
            return Positivity::Invalid;
        }
    }
    Positivity::PositiveOnBall {
        radius: bisect_root(spec, lo, hi),
    }
}

fn bisect_root<T: Real>(spec: &TaylorSpectrum<T>, mut lo: T, mut hi: T) -> T {
    for _ in 0..200 {
        let mid = (lo + hi) * T::lit(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        if spec.evaluate(mid) > T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Evidence that the order-`⌊α⌋+2J+1` truncation is positive: the
/// grouping polynomials `q_j` (coefficient lists in powers of `t`, in the
/// dimensionless variable `t = |ξ|/κ`), their minimum on the audit grid,
/// and the fitted lower-bound constant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PositivityCertificate<T> {
    pub depth: usize,
    pub order: usize,
    pub q_polys: Vec<Vec<T>>,
    /// `min_t Σ_k c_k t^{2k}` over the audit grid.
    pub grid_min: T,
    /// Largest `c` with `Σ_k c_k t^{2k} ≥ c(1 + t^{d+2})` on the grid,
    /// fitted from `κ^{2α} q_0(t/κ)` so that it does not depend on `J`.
    pub c_lower: T,
}

impl<T: Real> PositivityCertificate<T> {
    /// Evaluates `q_j` at the dimensionless radius `t`.
    pub fn eval_q(&self, j: usize, t: T) -> T {
        self.q_polys[j]
            .iter()
            .rev()
            .fold(T::zero(), |acc, &c| acc * t + c)
    }
}

/// Splits the order-`⌊α⌋+2J+1` polynomial into `q_0 + … + q_J` plus half
/// of the last term, then audits every piece.
///
/// `q_0` holds `a_0..a_{⌊α⌋}` and half of `a_{⌊α⌋+1}`; each `q_j` (j ≥ 1)
/// takes half of `a_{m−1}`, all of `a_m` and half of `a_{m+1}` for
/// `m = ⌊α⌋ + 2j`. A negative grid value means the construction is wrong
/// and is returned as an error rather than clipped.
pub fn lemma_decomposition<T: Real>(
    params: MaternParams<T>,
    depth: usize,
    grid: AuditGrid<T>,
) -> Result<PositivityCertificate<T>> {
    let order = select_order(&params, depth)?;
    let spec = taylor_coefficients(params, order);
    let a = spec.raw();
    let base = params.integer_part();
    let half = T::lit(0.5);

    let mut q_polys = Vec::with_capacity(depth + 1);
    let mut q0 = vec![T::zero(); 2 * (base + 1) + 1];
    for (k, &ak) in a.iter().enumerate().take(base + 1) {
        q0[2 * k] = ak;
    }
    q0[2 * (base + 1)] = half * a[base + 1];
    q_polys.push(q0);
    for j in 1..=depth {
        let m = base + 2 * j;
        let mut q = vec![T::zero(); 2 * (m + 1) + 1];
        q[2 * (m - 1)] = half * a[m - 1];
        q[2 * m] = a[m];
        q[2 * (m + 1)] = half * a[m + 1];
        q_polys.push(q);
    }

    let mut cert = PositivityCertificate {
        depth,
        order,
        q_polys,
        grid_min: T::infinity(),
        c_lower: T::infinity(),
    };

    let kappa = params.kappa();
    let kappa_2alpha = kappa.powf(T::lit(2.0) * params.alpha());
    let points = grid.points.max(2);
    let t_max = grid.radius_factor.max(T::one());
    let step = t_max / T::from_usize_lossy(points - 1);
    let growth = params.d() as i32 + 2;
    // relative slack for rounding in the cancelling sum of q_j terms
    let slack = T::epsilon() * T::lit(64.0);

    for i in 0..points {
        let t = step * T::from_usize_lossy(i);
        for j in 0..=depth {
            let v = cert.eval_q(j, t);
            let scale = cert.q_polys[j]
                .iter()
                .rev()
                .fold(T::zero(), |acc, &c| acc * t + c.abs());
            if v < -slack * scale {
                return Err(Error::CertificateFailed {
                    index: j,
                    t: t.to_f64_lossy(),
                    value: v.to_f64_lossy(),
                });
            }
        }
        let xi = t * kappa;
        let bound = T::one() + xi.powi(growth);
        let p = spec.evaluate(xi);
        cert.grid_min = cert.grid_min.min(p);
        cert.c_lower = cert.c_lower.min(kappa_2alpha * cert.eval_q(0, t) / bound);
    }

    if !(cert.c_lower > T::zero()) {
        return Err(Error::CertificateLowerBound(cert.c_lower.to_f64_lossy()));
    }
    // the fitted bound must also hold for the full truncation
    for i in 0..points {
        let xi = step * T::from_usize_lossy(i) * kappa;
        let bound = cert.c_lower * (T::one() + xi.powi(growth));
        if spec.evaluate(xi) < bound * (T::one() - slack) {
            return Err(Error::CertificateLowerBound(cert.c_lower.to_f64_lossy()));
        }
    }
    Ok(cert)
}
