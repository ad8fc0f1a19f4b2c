//! Independent oracles for the integration tests. Nothing here calls into
//! the numerical routines of the crate under test.
#![allow(dead_code)]

use nalgebra::DMatrix;

/// Composite Simpson on `[a, b]`, doubling the panel count until two
/// successive estimates agree to `tol` (Richardson-corrected result).
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let composite = |n: usize| {
        let h = (b - a) / n as f64;
        let mut acc = f(a) + f(b);
        for i in 1..n {
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
        }
        acc * h / 3.0
    };
    let mut n = 8;
    let mut prev = composite(n);
    loop {
        n *= 2;
        let next = composite(n);
        let delta = next - prev;
        if delta.abs() <= 15.0 * tol.max(1e-15 * next.abs()) || n >= 1 << 20 {
            return next + delta / 15.0;
        }
        prev = next;
    }
}

/// `K_ν(x) = ∫_0^∞ exp(−x cosh t) cosh(νt) dt`, truncated where the
/// integrand drops below 1e-30 of its value at the origin.
pub fn bessel_k_integral(nu: f64, x: f64) -> f64 {
    let f = |t: f64| (-x * t.cosh()).exp() * (nu * t).cosh();
    let mut upper = 1.0;
    while f(upper) > 1e-30 * f(0.0).max(1e-300) {
        upper += 1.0;
    }
    let scale = f(0.0).max(f(1.0));
    let mut total = 0.0;
    let pieces = (upper as usize) * 2;
    for i in 0..pieces {
        let a = upper * i as f64 / pieces as f64;
        let b = upper * (i + 1) as f64 / pieces as f64;
        total += simpson(&f, a, b, 1e-15 * scale);
    }
    total
}

/// Matérn closed forms in d = 1 for half-integer ν.
pub fn matern_1d_nu_half(kappa: f64, sigma2: f64, r: f64) -> f64 {
    sigma2 * (-kappa * r).exp() / (2.0 * kappa)
}

pub fn matern_1d_nu_three_halves(kappa: f64, sigma2: f64, r: f64) -> f64 {
    sigma2 * (1.0 + kappa * r) * (-kappa * r).exp() / (4.0 * kappa.powi(3))
}

pub fn dense(values: &[f64], n: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(n, n, values)
}

/// Upper factor `R` with `RᵀR = Q`, positive diagonal.
pub fn dense_cholesky_upper(q: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    q.clone().cholesky().map(|c| c.l().transpose())
}

pub fn relative_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

/// Naive DFT of a real sequence on a multi-dimensional periodic grid,
/// real part only: `Σ_x f(x) cos(ξ·x)` at every DFT frequency.
pub fn naive_dft_real(values: &[f64], shape: &[usize]) -> Vec<f64> {
    let total: usize = shape.iter().product();
    let index = |mut flat: usize| {
        let mut idx = vec![0usize; shape.len()];
        for p in (0..shape.len()).rev() {
            idx[p] = flat % shape[p];
            flat /= shape[p];
        }
        idx
    };
    (0..total)
        .map(|m| {
            let mi = index(m);
            (0..total)
                .map(|x| {
                    let xi = index(x);
                    let phase: f64 = (0..shape.len())
                        .map(|p| 2.0 * std::f64::consts::PI * (mi[p] * xi[p]) as f64 / shape[p] as f64)
                        .sum();
                    values[x] * phase.cos()
                })
                .sum()
        })
        .collect()
}

/// `2 − 2cos(2πm/n)` per axis for DFT index `m`.
pub fn axis_symbols(flat: usize, shape: &[usize]) -> Vec<f64> {
    let mut out = vec![0.0; shape.len()];
    let mut f = flat;
    for p in (0..shape.len()).rev() {
        let m = f % shape[p];
        f /= shape[p];
        out[p] = 2.0 - 2.0 * (2.0 * std::f64::consts::PI * m as f64 / shape[p] as f64).cos();
    }
    out
}

/// `α(α−1)…(α−k+1)/k!` by direct products.
pub fn binomial_series_coefficient(alpha: f64, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (alpha - i as f64) / (i + 1) as f64)
}
