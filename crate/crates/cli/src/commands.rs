use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use serde::Serialize;
use taylor_gmrf::experiment::{argmin_order, convergence, covariance_curve, error_vs_order, sensitivity, OrderScan};
use taylor_gmrf::lattice::assemble_precision;
use taylor_gmrf::sample::sample_field;
use taylor_gmrf::spectrum::{lemma_decomposition, taylor_coefficients, AuditGrid};
use taylor_gmrf::{CholeskyFactor64, PrecisionAssembly64, TaylorSpectrum64};

use crate::config::{ExperimentConfig, FactorForm};
use crate::error::CliError;
use crate::output::{num, open, write_header};

fn spectrum(config: &ExperimentConfig) -> TaylorSpectrum64 {
    taylor_coefficients(config.params, config.order)
}

#[derive(Serialize)]
struct Certificate {
    depth: usize,
    c_lower: f64,
    grid_min: f64,
}

#[derive(Serialize)]
struct CoeffsReport<'a> {
    alpha: f64,
    kappa: f64,
    sigma2: f64,
    d: usize,
    #[serde(rename = "K")]
    order: usize,
    a: &'a [f64],
    c: &'a [f64],
    positivity: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    certificate: Option<Certificate>,
    config: &'a BTreeMap<String, String>,
}

pub fn coeffs(config: &ExperimentConfig) -> Result<(), CliError> {
    let spec = spectrum(config);
    let certificate = match config.depth {
        Some(j) => {
            let cert = lemma_decomposition(config.params, j, AuditGrid::default())?;
            Some(Certificate {
                depth: cert.depth,
                c_lower: cert.c_lower,
                grid_min: cert.grid_min,
            })
        }
        None => None,
    };
    let p = &config.params;
    let report = CoeffsReport {
        alpha: p.alpha(),
        kappa: p.kappa(),
        sigma2: p.sigma2(),
        d: p.d(),
        order: spec.order(),
        a: spec.raw(),
        c: spec.scaled(),
        positivity: spec.positivity().to_string(),
        certificate,
        config: &config.resolved,
    };
    let mut out = open(config.output.as_deref())?;
    serde_json::to_writer_pretty(&mut out, &report)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

pub fn covariance(config: &ExperimentConfig) -> Result<(), CliError> {
    let spec = spectrum(config);
    let columns: Vec<Vec<f64>> = config
        .kinds
        .iter()
        .map(|&kind| {
            covariance_curve(
                &spec,
                kind,
                &config.lags,
                Some(config.h),
                config.mode,
                config.boundary,
                config.n.iter().copied().max().unwrap_or(0),
                &config.quadrature,
            )
        })
        .collect::<Result<_, _>>()?;

    let mut out = open(config.output.as_deref())?;
    write_header(&mut out, config, &[("positivity", spec.positivity().to_string())])?;
    let mut w = csv::Writer::from_writer(out);
    let mut head = vec!["lag".to_string()];
    head.extend(config.kinds.iter().map(|k| k.to_string()));
    w.write_record(&head)?;
    for (i, lag) in config.lags.iter().enumerate() {
        let mut row = vec![lag.to_string()];
        row.extend(columns.iter().map(|c| num(c[i])));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn assemble_for(config: &ExperimentConfig) -> Result<PrecisionAssembly64, CliError> {
    let spec = spectrum(config);
    let grid = config.grid()?;
    Ok(assemble_precision(&spec, &grid, config.mode)?)
}

pub fn assemble(config: &ExperimentConfig) -> Result<(), CliError> {
    let a = assemble_for(config)?;
    let terms: Vec<String> = a
        .terms
        .iter()
        .map(|t| format!("k={} w={} {:?}", t.k, num(t.weight), t.sign))
        .collect();
    let mut out = open(config.output.as_deref())?;
    write_header(
        &mut out,
        config,
        &[
            ("computational_shape", format!("{:?}", a.grid.computational_shape())),
            ("terms", terms.join("; ")),
        ],
    )?;
    a.q.write_coordinate(&mut out)?;
    out.flush()?;
    eprintln!("assembled {}x{} precision, {} nonzeros", a.q.nrows(), a.q.ncols(), a.q.nnz());
    Ok(())
}

fn factor_for(config: &ExperimentConfig) -> Result<(PrecisionAssembly64, CholeskyFactor64), CliError> {
    let a = assemble_for(config)?;
    let start = Instant::now();
    let f = CholeskyFactor64::factor_by_updates(&a, &config.factor_options)?;
    eprintln!("factored in {:.2?}: {}", start.elapsed(), f.stats());
    let f = match config.form {
        FactorForm::Plain => f,
        FactorForm::Unit => f.to_unit_diagonal(),
    };
    Ok((a, f))
}

pub fn factor(config: &ExperimentConfig) -> Result<(), CliError> {
    let (_, f) = factor_for(config)?;
    let s = f.stats();
    let mut extra = vec![
        ("stats.n", s.n.to_string()),
        ("stats.nnz", s.nnz.to_string()),
        ("stats.min_diagonal", num(s.min_diagonal)),
        ("stats.max_diagonal", num(s.max_diagonal)),
        ("stats.updates", s.updates.to_string()),
        ("stats.downdates", s.downdates.to_string()),
    ];
    if let Some(w) = f.diagonal_weights() {
        let min = w.iter().copied().fold(f64::INFINITY, f64::min);
        extra.push(("diagonal_weights.min", num(min)));
    }
    let mut out = open(config.output.as_deref())?;
    write_header(&mut out, config, &extra)?;
    f.write_coordinate(&mut out)?;
    out.flush()?;
    Ok(())
}

pub fn sample(config: &ExperimentConfig) -> Result<(), CliError> {
    let (a, f) = factor_for(config)?;
    let start = Instant::now();
    let draws = sample_field(&f, &a.grid, config.seed, config.count)?;
    eprintln!("drew {} realization(s) in {:.2?}", draws.len(), start.elapsed());

    let n = a.grid.n();
    let width = *n.last().unwrap_or(&1);
    let mut out = open(config.output.as_deref())?;
    write_header(&mut out, config, &[])?;
    let mut w = csv::Writer::from_writer(out);
    let mut head = vec!["realization".to_string(), "row".to_string()];
    head.extend((0..width).map(|c| format!("c{c}")));
    w.write_record(&head)?;
    for r in &draws {
        for (row, chunk) in r.values.chunks(width).enumerate() {
            let mut rec = vec![r.index.to_string(), row.to_string()];
            rec.extend(chunk.iter().map(|&v| num(v)));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn convergence_cmd(config: &ExperimentConfig) -> Result<(), CliError> {
    let spec = spectrum(config);
    let rows = convergence(&spec, &config.steps, &config.lags, config.mode, &config.quadrature)?;
    let mut out = open(config.output.as_deref())?;
    write_header(&mut out, config, &[])?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["h", "lag", "discrete_value", "continuous_value", "abs_error", "kind"])?;
    for r in rows {
        w.write_record([
            r.h.to_string(),
            r.lag.to_string(),
            num(r.discrete_value),
            num(r.continuous_value),
            num(r.abs_error),
            r.kind.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn error_vs_order_cmd(config: &ExperimentConfig) -> Result<(), CliError> {
    let side = (config.n[0] - 1) as f64 * config.h;
    let start = Instant::now();
    let rows = match (&config.sides, &config.factors) {
        (None, None) => {
            let rows = error_vs_order(&OrderScan {
                params: config.params,
                grid: config.grid()?,
                orders: config.orders.clone(),
                modes: vec![config.mode],
                target: config.target,
            })?;
            vec![(side, config.boundary.factor(), rows)]
        }
        (sides, factors) => {
            let sides = sides.clone().unwrap_or_else(|| vec![side]);
            let factors = factors.clone().unwrap_or_else(|| vec![config.boundary.factor()]);
            sensitivity(config.params, config.h, &sides, &factors, &config.orders, &[config.mode], config.target)?
                .into_iter()
                .map(|r| (r.side, r.factor, r.errors))
                .collect()
        }
    };
    eprintln!("scanned {} configuration(s) in {:.2?}", rows.len(), start.elapsed());

    let argmins: Vec<String> = rows
        .iter()
        .map(|(s, f, r)| format!("side {s} factor {f}: {:?}", argmin_order(r)))
        .collect();
    let mut out = open(config.output.as_deref())?;
    write_header(&mut out, config, &[("argmin", argmins.join("; "))])?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["side", "factor", "mode", "K", "max_abs_error", "status"])?;
    for (side, factor, errors) in &rows {
        for e in errors {
            w.write_record([
                side.to_string(),
                factor.to_string(),
                e.mode.to_string(),
                e.order.to_string(),
                e.max_abs_error.map(num).unwrap_or_default(),
                e.skipped.clone().unwrap_or_else(|| "ok".into()),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
