//! Acceptance suite: one line per criterion, non-zero exit if any fails.

mod common;

use std::time::{Duration, Instant};

use common::{bessel_k_integral, dense, dense_cholesky_upper, relative_frobenius};
use taylor_gmrf::covariance::{band_limited, exact_matern, taylor_covariance};
use taylor_gmrf::experiment::{
    argmin_order, convergence, error_vs_order, is_u_shaped, sensitivity, OrderScan,
};
use taylor_gmrf::lattice::assemble_precision;
use taylor_gmrf::sample::{empirical_covariance, realize_from_normals, sample_field, standard_normals};
use taylor_gmrf::specfun::bessel_k;
use taylor_gmrf::spectrum::{lemma_decomposition, select_order, taylor_coefficients, AuditGrid};
use taylor_gmrf::{
    BesselOrder, Boundary, CovarianceKind, CholeskyFactor, Error, FactorOptions, LatticeGrid, MaternParams,
    QuadratureSettings, SymbolMode, UpdateOrder,
};

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn coefficient_exactness() -> Outcome {
    let spec = taylor_coefficients(MaternParams::new(1.5, 1.0, 1.0, 1).unwrap(), 4);
    let expected: [f64; 5] = [1.0, 1.5, 0.375, -0.0625, 0.0234375];
    let worst = spec
        .scaled()
        .iter()
        .zip(expected)
        .map(|(a, e)| ((a - e) / e).abs())
        .fold(0.0, f64::max);
    check(worst <= 1e-15, format!("max relative deviation {worst:e}"))
}

fn variance_oracles() -> Outcome {
    let p = MaternParams::new(1.5, 1.0, 1.0, 1).unwrap();
    let exact = exact_matern(&p, 0.0).unwrap();
    let band = band_limited(&p, &[0.0], &QuadratureSettings::default()).unwrap();
    let pi = std::f64::consts::PI;
    let (de, db) = ((exact - 1.0 / pi).abs(), (band - 1.0 / (2f64.sqrt() * pi)).abs());
    check(de <= 1e-8 && db <= 1e-8, format!("exact off by {de:e}, band-limited off by {db:e}"))
}

fn fig1_ordering() -> Outcome {
    let p = MaternParams::new(1.5, 1.0, 1.0, 1).unwrap();
    let spec = taylor_coefficients(p, 4);
    let s = QuadratureSettings::default();
    let (mut taylor_err, mut band_err) = (0.0f64, 0.0f64);
    for i in 0..=10 {
        let x = 0.5 * i as f64;
        let exact = exact_matern(&p, x).unwrap();
        taylor_err = taylor_err.max((taylor_covariance(&spec, &[x], &s).unwrap() - exact).abs());
        band_err = band_err.max((band_limited(&p, &[x], &s).unwrap() - exact).abs());
    }
    check(
        taylor_err < band_err,
        format!("max |taylor - exact| = {taylor_err:.4e}, max |band - exact| = {band_err:.4e}"),
    )
}

fn h_convergence() -> Outcome {
    let spec = taylor_coefficients(MaternParams::new(1.5, 1.0, 1.0, 1).unwrap(), 4);
    let steps = [0.4, 0.2, 0.1, 0.05];
    let lags = [0.0, 1.0];
    let rows = convergence(&spec, &steps, &lags, SymbolMode::Separable, &QuadratureSettings::default())
        .map_err(|e| e.to_string())?;
    let mut ok = true;
    let mut detail = Vec::new();
    for &lag in &lags {
        let errs: Vec<f64> = steps
            .iter()
            .map(|&h| rows.iter().find(|r| r.h == h && r.lag == lag).unwrap().abs_error)
            .collect();
        ok &= errs[3] < errs[0];
        ok &= errs.windows(2).all(|w| w[1] <= 1.1 * w[0]);
        detail.push(format!(
            "lag {lag}: {}",
            errs.iter().map(|e| format!("{e:.2e}")).collect::<Vec<_>>().join(" > ")
        ));
    }
    check(ok, detail.join("; "))
}

fn factorization_oracle() -> Outcome {
    let mut count = 0;
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    let alphas = [1.5, 2.5, std::f64::consts::PI];
    let grids: Vec<(usize, usize)> = vec![(1, 8), (1, 16), (1, 32), (1, 64), (2, 4), (2, 6), (2, 8)];
    for &(d, n) in &grids {
        for &alpha in &alphas {
            for depth in [1, 2] {
                for mode in [SymbolMode::Separable, SymbolMode::LaplacianPower] {
                    if d == 1 && mode == SymbolMode::LaplacianPower {
                        continue;
                    }
                    let params = MaternParams::new(alpha, 1.0, 1.0, d).unwrap();
                    let order = select_order(&params, depth).unwrap();
                    let spec = taylor_coefficients(params, order);
                    let grid = LatticeGrid::cube(d, 1.0, n, Boundary::Periodic).unwrap();
                    let a = assemble_precision(&spec, &grid, mode).unwrap();
                    let label = format!("d={d} n={n} alpha={alpha:.3} J={depth} {mode}");
                    let f = match CholeskyFactor::factor_by_updates(&a, &FactorOptions::default()) {
                        Ok(f) => f,
                        Err(e) => {
                            failures.push(format!("{label}: {e}"));
                            continue;
                        }
                    };
                    let size = a.q.nrows();
                    let Some(oracle) = dense_cholesky_upper(&dense(&a.q.to_dense(), size)) else {
                        failures.push(format!("{label}: dense oracle not positive definite"));
                        continue;
                    };
                    let err = relative_frobenius(&dense(&f.matrix().to_dense(), size), &oracle);
                    worst = worst.max(err);
                    if err > 1e-8 {
                        failures.push(format!("{label}: {err:e}"));
                    }
                    count += 1;
                }
            }
        }
    }
    check(
        failures.is_empty() && count >= 20,
        format!("{count} assemblies, worst relative Frobenius error {worst:.2e}; failures: {failures:?}"),
    )
}

fn ordering_regression() -> Outcome {
    let spec = taylor_coefficients(MaternParams::new(1.5, 1.0, 1.0, 1).unwrap(), 4);
    let grid = LatticeGrid::new(0.1, vec![16], Boundary::Periodic).unwrap();
    let a = assemble_precision(&spec, &grid, SymbolMode::Separable).unwrap();
    let interleaved = FactorOptions {
        update_order: UpdateOrder::Interleaved,
        ..Default::default()
    };
    let broke = match CholeskyFactor::factor_by_updates(&a, &interleaved) {
        Err(e @ Error::DowndateBreakdown { .. }) => Some(e.to_string()),
        _ => None,
    };
    let ordered = CholeskyFactor::factor_by_updates(&a, &FactorOptions::default());
    check(
        broke.is_some() && ordered.is_ok(),
        format!(
            "interleaved: {}; positives first: {}",
            broke.unwrap_or_else(|| "no breakdown".into()),
            if ordered.is_ok() { "ok" } else { "failed" }
        ),
    )
}

fn sampler_consistency() -> Outcome {
    let spec = taylor_coefficients(MaternParams::new(1.5, 1.0, 1.0, 1).unwrap(), 4);
    let grid = LatticeGrid::new(0.1, vec![32], Boundary::Periodic).unwrap();
    let a = assemble_precision(&spec, &grid, SymbolMode::Separable).unwrap();
    let f = CholeskyFactor::factor_by_updates(&a, &FactorOptions::default()).map_err(|e| e.to_string())?;
    let inv = dense(&a.q.to_dense(), 32).try_inverse().ok_or("Q not invertible")?;
    let draws = sample_field(&f, &grid, 20240601, 100_000).map_err(|e| e.to_string())?;
    let c = empirical_covariance(&draws).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for i in 0..32 {
        for j in 0..32 {
            worst = worst.max((c.entry(i, j) - inv[(i, j)]).abs() / c.standard_error(i, j));
        }
    }
    let unit = f.to_unit_diagonal();
    let mut path_gap = 0.0f64;
    for index in 0..100 {
        let z = standard_normals::<f64>(7, index, 32);
        let x = realize_from_normals(&f, &z).unwrap();
        let y = realize_from_normals(&unit, &z).unwrap();
        path_gap = x.iter().zip(&y).map(|(p, q)| (p - q).abs()).fold(path_gap, f64::max);
    }
    check(
        worst <= 3.0 && path_gap <= 1e-12,
        format!("max deviation {worst:.2} standard errors; plain vs unit-diagonal gap {path_gap:e}"),
    )
}

fn error_curve() -> Outcome {
    let params = MaternParams::new(std::f64::consts::PI, 1.0, 1.0, 2).unwrap();
    let orders: Vec<usize> = (1..=8).collect();
    let modes = [SymbolMode::LaplacianPower, SymbolMode::Separable];
    let grid = LatticeGrid::cube(2, 0.1, 201, Boundary::PeriodicExtended(2)).unwrap();
    let rows = error_vs_order(&OrderScan {
        params,
        grid,
        orders: orders.clone(),
        modes: modes.to_vec(),
        target: CovarianceKind::Exact,
    })
    .map_err(|e| e.to_string())?;
    let mut lines = Vec::new();
    let mut ok = false;
    for mode in modes {
        let sub: Vec<_> = rows.iter().filter(|r| r.mode == mode).cloned().collect();
        let argmin = argmin_order(&sub);
        let u = is_u_shaped(&sub, 4);
        ok |= u && argmin == Some(4);
        let curve: Vec<String> = sub
            .iter()
            .map(|r| match r.max_abs_error {
                Some(e) => format!("K={}:{e:.3e}", r.order),
                None => format!("K={}:skipped", r.order),
            })
            .collect();
        lines.push(format!("{mode} argmin={argmin:?} u_shaped={u} [{}]", curve.join(" ")));
    }
    // sensitivity to the unstated domain side and boundary factor
    let sens = sensitivity(params, 0.1, &[20.0, 40.0], &[2, 3], &orders, &[SymbolMode::LaplacianPower], CovarianceKind::Exact)
        .map_err(|e| e.to_string())?;
    let report: Vec<String> = sens
        .iter()
        .map(|r| format!("side={} factor={} argmin={:?}", r.side, r.factor, r.argmin))
        .collect();
    lines.push(format!("sensitivity ({}): {}", SymbolMode::LaplacianPower, report.join(", ")));
    check(ok, lines.join("\n    "))
}

fn positivity_certificates() -> Outcome {
    let mut worst_c = f64::INFINITY;
    let mut failures = Vec::new();
    for (alpha, d) in [(1.5, 1), (2.5, 1), (std::f64::consts::PI, 2), (2.2, 2)] {
        let params = MaternParams::new(alpha, 1.0, 1.0, d).unwrap();
        for depth in 1..=4 {
            match lemma_decomposition(params, depth, AuditGrid::default()) {
                Ok(cert) => {
                    worst_c = worst_c.min(cert.c_lower);
                    if !(cert.c_lower > 0.0) {
                        failures.push(format!("alpha={alpha} J={depth}: c_lower={}", cert.c_lower));
                    }
                }
                Err(e) => failures.push(format!("alpha={alpha} J={depth}: {e}")),
            }
        }
    }
    check(
        failures.is_empty(),
        format!("16 certificates, smallest c_lower {worst_c:.3e}; failures: {failures:?}"),
    )
}

fn bessel_kernel() -> Outcome {
    let k = |nu: f64, x: f64| bessel_k(BesselOrder::new(nu).unwrap(), x).unwrap();
    let half = (k(0.5, 1.0) - (std::f64::consts::PI / 2.0).sqrt() * (-1.0f64).exp()).abs();
    let mut worst = 0.0f64;
    for nu in [0.25, 1.0, std::f64::consts::PI - 1.0] {
        for x in [0.1, 1.0, 10.0] {
            let oracle = bessel_k_integral(nu, x);
            worst = worst.max(((k(nu, x) - oracle) / oracle).abs());
        }
    }
    check(
        half <= 1e-10 && worst <= 1e-8,
        format!("K_1/2(1) off by {half:e}; worst relative gap to integral {worst:e}"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Duration); 10] = [
        ("coefficient exactness", coefficient_exactness, Duration::from_millis(1)),
        ("variance oracles", variance_oracles, Duration::from_secs(1)),
        ("taylor beats band-limited", fig1_ordering, Duration::from_secs(10)),
        ("convergence in h", h_convergence, Duration::from_secs(30)),
        ("factorization oracle", factorization_oracle, Duration::from_secs(30)),
        ("ordering regression", ordering_regression, Duration::from_secs(60)),
        ("sampler consistency", sampler_consistency, Duration::from_secs(60)),
        ("error vs order", error_curve, Duration::from_secs(600)),
        ("positivity certificates", positivity_certificates, Duration::from_secs(5)),
        ("bessel kernel", bessel_kernel, Duration::from_secs(5)),
    ];
    let mut failed = 0;
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let verdict = if outcome.is_ok() { "PASS" } else { "FAIL" };
        let detail = outcome.unwrap_or_else(|e| e);
        let over = if elapsed > *budget {
            format!(" (over budget {budget:?})")
        } else {
            String::new()
        };
        println!("criterion {:>2} {verdict} {name} [{elapsed:.3?}{over}]: {detail}", i + 1);
        if verdict == "FAIL" {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
