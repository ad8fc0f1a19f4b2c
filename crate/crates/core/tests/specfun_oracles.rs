mod common;

use common::{bessel_k_integral, binomial_series_coefficient};
use proptest::prelude::*;
use taylor_gmrf::specfun::{bessel_k, gamma, scaled_bessel_k};
use taylor_gmrf::spectrum::raw_coefficients;
use taylor_gmrf::BesselOrder;

fn k(nu: f64, x: f64) -> f64 {
    bessel_k(BesselOrder::new(nu).unwrap(), x).unwrap()
}

#[test]
fn integral_representation_grid() {
    for nu in [0.0, 0.25, 0.5, 1.0, std::f64::consts::PI - 1.0, 3.5] {
        for x in [0.05, 0.1, 0.7, 1.0, 2.5, 10.0, 30.0] {
            let oracle = bessel_k_integral(nu, x);
            let value = k(nu, x);
            assert!(((value - oracle) / oracle).abs() < 1e-9, "nu={nu} x={x}: {value} vs {oracle}");
        }
    }
}

#[test]
fn frozen_reference_values() {
    // quadrature of the integral representation in an independent package
    let cases = [
        (0.5, 1.0, 0.4610685044478946),
        (1.0, 1.0, 0.6019072301972346),
        (std::f64::consts::PI - 1.0, 2.0, 0.28417743902122283),
        (0.25, 0.1, 2.685156871876059),
        (1.0, 10.0, 1.8648773453825585e-05),
        (std::f64::consts::PI - 1.0, 10.0, 2.2116929947316838e-05),
    ];
    for (nu, x, expected) in cases {
        assert!(((k(nu, x) - expected) / expected).abs() < 1e-10, "nu={nu} x={x}");
    }
    assert!((gamma(3.5f64).unwrap() - 3.3233509704478426).abs() < 1e-14);
}

#[test]
fn scaled_form_is_continuous_at_zero() {
    let order = BesselOrder::new(1.7).unwrap();
    let at_zero = scaled_bessel_k(order, 0.0f64).unwrap();
    let near = scaled_bessel_k(order, 1e-9f64).unwrap();
    assert!(((at_zero - near) / at_zero).abs() < 1e-8);
}

proptest! {
    #[test]
    fn wronskian_like_recurrence(nu in 0.0f64..4.0, x in 0.05f64..25.0) {
        // K_{ν+1}(x) − K_{ν−1}(x) = (2ν/x) K_ν(x), using K_{−ν} = K_ν
        let lhs = k(nu + 1.0, x) - k((nu - 1.0).abs(), x);
        let rhs = 2.0 * nu / x * k(nu, x);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * k(nu + 1.0, x));
    }

    #[test]
    fn coefficients_match_binomial_products(alpha in 0.6f64..7.0, order in 0usize..12) {
        let a = raw_coefficients(alpha, order);
        for (i, &ai) in a.iter().enumerate() {
            let oracle = binomial_series_coefficient(alpha, i);
            prop_assert!((ai - oracle).abs() <= 1e-13 * oracle.abs().max(1e-12));
        }
    }
}
