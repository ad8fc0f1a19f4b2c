//! Gamma function and the modified Bessel function of the second kind.
//!
//! `K_ν(x)` follows Temme's series for `x ≤ 2` and Steed's continued
//! fraction (CF2) for `x > 2`, both evaluated at the reduced order
//! `μ = ν − round(ν) ∈ [−½, ½]`, then climbs to `ν` with the forward
//! recurrence `K_{μ+1} = 2μ/x · K_μ + K_{μ−1}`, which is stable for `K`.

use crate::error::{Error, Result};
use crate::scalar::Real;

const MAX_ITERATIONS: usize = 10_000;

/// Lanczos approximation, g = 7, nine terms.
const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Coefficients of `1/Γ(z) = Σ_{k≥1} c_k z^k` (Abramowitz & Stegun 6.1.34).
const RECIP_GAMMA: [f64; 26] = [
    1.0,
    0.577_215_664_901_532_9,
    -0.655_878_071_520_253_8,
    -0.042_002_635_034_095_2,
    0.166_538_611_382_291_5,
    -0.042_197_734_555_544_3,
    -0.009_621_971_527_877_0,
    0.007_218_943_246_663_0,
    -0.001_165_167_591_859_1,
    -0.000_215_241_674_114_9,
    0.000_128_050_282_388_2,
    -0.000_020_134_854_780_7,
    -0.000_001_250_493_482_1,
    0.000_001_133_027_232_0,
    -0.000_000_205_633_841_7,
    0.000_000_006_116_095_0,
    0.000_000_005_002_007_5,
    -0.000_000_001_181_274_6,
    0.000_000_000_104_342_7,
    0.000_000_000_007_782_3,
    -0.000_000_000_003_696_8,
    0.000_000_000_000_510_0,
    -0.000_000_000_000_020_6,
    -0.000_000_000_000_005_4,
    0.000_000_000_000_001_4,
    0.000_000_000_000_000_1,
];

/// Γ(x) for x > 0.
pub fn gamma<T: Real>(x: T) -> Result<T> {
    if !x.is_finite() || x <= T::zero() {
        return Err(Error::Domain {
            function: "gamma",
            value: x.to_f64_lossy(),
            reason: "requires finite x > 0",
        });
    }
    Ok(gamma_positive(x))
}

fn gamma_positive<T: Real>(x: T) -> T {
    let half = T::lit(0.5);
    if x < half {
        // reflection: Γ(x)Γ(1−x) = π / sin(πx)
        let pi = T::PI();
        return pi / ((pi * x).sin() * gamma_positive(T::one() - x));
    }
    let z = x - T::one();
    let mut acc = T::lit(LANCZOS[0]);
    for (i, &coef) in LANCZOS.iter().enumerate().skip(1) {
        acc = acc + T::lit(coef) / (z + T::from_usize_lossy(i));
    }
    let t = z + T::lit(LANCZOS_G) + half;
    // split the power so large arguments do not overflow before the product
    let p = t.powf((z + half) * half);
    T::lit((2.0 * std::f64::consts::PI).sqrt()) * p * p * (-t).exp() * acc
}

/// Returns (1/Γ(1+μ), 1/Γ(1−μ), γ₁(μ), γ₂(μ)) for |μ| ≤ ½, where
/// γ₁ = (1/Γ(1−μ) − 1/Γ(1+μ)) / 2μ and γ₂ = (1/Γ(1−μ) + 1/Γ(1+μ)) / 2.
fn temme_gammas<T: Real>(mu: T) -> (T, T, T, T) {
    // 1/Γ(1+z) = Σ_{k≥1} c_k z^{k−1}; split into even and odd powers of z
    let mut even = T::zero();
    let mut odd = T::zero();
    let mu2 = mu * mu;
    let mut pow = T::one();
    for k in (0..RECIP_GAMMA.len()).step_by(2) {
        // c_{k+1} multiplies z^k (even), c_{k+2} multiplies z^{k+1} (odd)
        even = even + T::lit(RECIP_GAMMA[k]) * pow;
        if k + 1 < RECIP_GAMMA.len() {
            odd = odd + T::lit(RECIP_GAMMA[k + 1]) * pow;
        }
        pow = pow * mu2;
    }
    let recip_plus = even + mu * odd;
    let recip_minus = even - mu * odd;
    (recip_plus, recip_minus, -odd, even)
}

/// Order of a modified Bessel function, stored as |ν|.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselOrder<T> {
    nu: T,
}

impl<T: Real> BesselOrder<T> {
    /// Negative orders are reduced with `K_{−ν} = K_ν`.
    pub fn new(nu: T) -> Result<Self> {
        if !nu.is_finite() {
            return Err(Error::Domain {
                function: "bessel_k",
                value: nu.to_f64_lossy(),
                reason: "order must be finite",
            });
        }
        Ok(Self { nu: nu.abs() })
    }

    pub fn value(&self) -> T {
        self.nu
    }
}

/// K_ν(x) for x > 0.
pub fn bessel_k<T: Real>(order: BesselOrder<T>, x: T) -> Result<T> {
    bessel_k_pair(order, x).map(|(k, _)| k)
}

/// (K_ν(x), K_{ν+1}(x)).
pub fn bessel_k_pair<T: Real>(order: BesselOrder<T>, x: T) -> Result<(T, T)> {
    if !x.is_finite() || x <= T::zero() {
        return Err(Error::Domain {
            function: "bessel_k",
            value: x.to_f64_lossy(),
            reason: "requires finite x > 0",
        });
    }
    let nu = order.value();
    let steps = (nu + T::lit(0.5)).floor();
    let mu = nu - steps;
    let steps = steps.to_usize().unwrap_or(usize::MAX);

    let (mut k_mu, mut k_mu1) = if x <= T::lit(2.0) {
        temme_series(mu, x)?
    } else {
        steed_cf2(mu, x)?
    };

    let two_over_x = T::lit(2.0) / x;
    for i in 0..steps {
        let next = (mu + T::from_usize_lossy(i + 1)) * two_over_x * k_mu1 + k_mu;
        k_mu = k_mu1;
        k_mu1 = next;
    }
    if !k_mu.is_finite() || !k_mu1.is_finite() {
        return Err(Error::Overflow {
            function: "bessel_k",
            x: x.to_f64_lossy(),
        });
    }
    Ok((k_mu, k_mu1))
}

fn temme_series<T: Real>(mu: T, x: T) -> Result<(T, T)> {
    let eps = T::epsilon();
    let half_x = x * T::lit(0.5);
    let log_term = -half_x.ln();
    let pi_mu = T::PI() * mu;
    let sin_ratio = if pi_mu.abs() < eps {
        T::one()
    } else {
        pi_mu / pi_mu.sin()
    };
    let e = mu * log_term;
    let sinh_ratio = if e.abs() < eps { T::one() } else { e.sinh() / e };
    let (recip_plus, recip_minus, g1, g2) = temme_gammas(mu);

    let mut f = sin_ratio * (g1 * e.cosh() + g2 * sinh_ratio * log_term);
    let exp_e = e.exp();
    let mut p = T::lit(0.5) * exp_e / recip_plus;
    let mut q = T::lit(0.5) / (exp_e * recip_minus);
    let mut c = T::one();
    let quarter_x2 = half_x * half_x;
    let mut sum = f;
    let mut sum1 = p;
    for i in 1..=MAX_ITERATIONS {
        let fi = T::from_usize_lossy(i);
        f = (fi * f + p + q) / (fi * fi - mu * mu);
        c = c * quarter_x2 / fi;
        p = p / (fi - mu);
        q = q / (fi + mu);
        let del = c * f;
        sum = sum + del;
        sum1 = sum1 + c * (p - fi * f);
        if del.abs() < sum.abs() * eps {
            return Ok((sum, sum1 * T::lit(2.0) / x));
        }
    }
    Err(Error::SeriesNonConvergence {
        function: "bessel_k (Temme series)",
        iterations: MAX_ITERATIONS,
    })
}

fn steed_cf2<T: Real>(mu: T, x: T) -> Result<(T, T)> {
    let eps = T::epsilon();
    let two = T::lit(2.0);
    let mut b = two * (T::one() + x);
    let mut d = T::one() / b;
    let mut h = d;
    let mut delh = d;
    let mut q1 = T::zero();
    let mut q2 = T::one();
    let a1 = T::lit(0.25) - mu * mu;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = T::one() + q * delh;
    for i in 1..=MAX_ITERATIONS {
        let fi = T::from_usize_lossy(i);
        a = a - two * fi;
        c = -a * c / (fi + T::one());
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q = q + c * qnew;
        b = b + two;
        d = T::one() / (b + a * d);
        delh = (b * d - T::one()) * delh;
        h = h + delh;
        let dels = q * delh;
        s = s + dels;
        if (dels / s).abs() < eps {
            let h = a1 * h;
            let k_mu = (T::PI() / (two * x)).sqrt() * (-x).exp() / s;
            let k_mu1 = k_mu * (mu + x + T::lit(0.5) - h) / x;
            return Ok((k_mu, k_mu1));
        }
    }
    Err(Error::SeriesNonConvergence {
        function: "bessel_k (Steed CF2)",
        iterations: MAX_ITERATIONS,
    })
}

/// `x^ν K_ν(x)`, continuous at zero where it equals `2^{ν−1} Γ(ν)` (ν > 0).
///
/// Used by the Matérn closed form, which needs the product rather than the
/// two factors separately.
pub fn scaled_bessel_k<T: Real>(order: BesselOrder<T>, x: T) -> Result<T> {
    let nu = order.value();
    if x < T::zero() || !x.is_finite() {
        return Err(Error::Domain {
            function: "scaled_bessel_k",
            value: x.to_f64_lossy(),
            reason: "requires finite x ≥ 0",
        });
    }
    if x == T::zero() {
        if nu == T::zero() {
            return Err(Error::Overflow {
                function: "scaled_bessel_k",
                x: 0.0,
            });
        }
        return Ok(T::lit(2.0).powf(nu - T::one()) * gamma(nu)?);
    }
    match bessel_k(order, x) {
        Ok(k) => {
            let v = x.powf(nu) * k;
            if v.is_finite() {
                Ok(v)
            } else {
                small_argument_limit(nu, x)
            }
        }
        Err(Error::Overflow { .. }) => small_argument_limit(nu, x),
        Err(e) => Err(e),
    }
}

fn small_argument_limit<T: Real>(nu: T, x: T) -> Result<T> {
    if nu > T::zero() {
        Ok(T::lit(2.0).powf(nu - T::one()) * gamma(nu)?)
    } else {
        Err(Error::Overflow {
            function: "scaled_bessel_k",
            x: x.to_f64_lossy(),
        })
    }
}
