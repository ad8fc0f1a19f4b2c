//! Experiment drivers shared by the CLI and the acceptance tests: covariance
//! curves, error against the Taylor order, and convergence in `h`.

use rayon::prelude::*;
use serde::Serialize;

use crate::covariance::{
    band_limited, discrete_covariance, discrete_covariance_field, exact_matern, interpolated_covariance,
    lattice_index, taylor_covariance, CovarianceKind, CovarianceQuery, QuadratureSettings,
    SymbolMode,
};
use crate::error::{Error, Result};
use crate::fft::{ravel, unravel};
use crate::lattice::{Boundary, LatticeGrid};
use crate::scalar::Real;
use crate::spectrum::{taylor_coefficients, MaternParams, TaylorSpectrum};

/// Values of one covariance kind along the first axis, at the given lags.
///
/// The discrete kind is computed on a periodic grid of at least
/// `min_points` per axis (more if the largest lag needs it), enlarged by
/// `boundary`, so a curve costs one FFT. Lags must then be multiples of `h`.
pub fn covariance_curve<T: Real>(
    spec: &TaylorSpectrum<T>,
    kind: CovarianceKind,
    lags: &[T],
    h: Option<T>,
    mode: SymbolMode,
    boundary: Boundary,
    min_points: usize,
    settings: &QuadratureSettings<T>,
) -> Result<Vec<T>> {
    let d = spec.params().d();
    let along = |x: T| {
        let mut v = vec![T::zero(); d];
        v[0] = x;
        v
    };
    if kind == CovarianceKind::Discrete {
        let h = h.ok_or_else(|| Error::InvalidParameters("discrete curve needs h".into()))?;
        let index: Vec<i64> = lags
            .iter()
            .map(|&x| lattice_index(&[x], h).map(|i| i[0].abs()))
            .collect::<Result<_>>()?;
        let reach = index.iter().copied().max().unwrap_or(0) as usize;
        let grid = LatticeGrid::cube(d, h, (reach + 1).max(min_points).max(3), boundary)?;
        let shape = grid.computational_shape();
        let field = discrete_covariance_field(spec, h, &shape, mode)?;
        return Ok(index
            .iter()
            .map(|&i| {
                let mut idx = vec![0; d];
                idx[0] = i as usize;
                field[ravel(&idx, &shape)]
            })
            .collect());
    }
    lags.par_iter()
        .map(|&x| {
            CovarianceQuery {
                kind,
                lag: along(x),
                spectrum: spec.clone(),
                h,
                mode,
            }
            .evaluate(settings)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderError {
    pub order: usize,
    pub mode: SymbolMode,
    /// `None` when the order was skipped.
    pub max_abs_error: Option<f64>,
    /// Why the order was skipped, if it was.
    pub skipped: Option<String>,
}

/// Setup of the error-versus-order experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderScan<T> {
    pub params: MaternParams<T>,
    pub grid: LatticeGrid<T>,
    pub orders: Vec<usize>,
    pub modes: Vec<SymbolMode>,
    /// `Exact` or `BandLimited`.
    pub target: CovarianceKind,
}

/// For each order, the lattice covariance field on the computational grid
/// (one inverse FFT) against the target covariance, maximized over
/// the lags `|i_p| ≤ n_p/2` of the target grid. Orders whose spectrum is
/// not positive everywhere are skipped and marked.
pub fn error_vs_order<T: Real>(scan: &OrderScan<T>) -> Result<Vec<OrderError>> {
    let grid = &scan.grid;
    let d = grid.d();
    if scan.params.d() != d {
        return Err(Error::DimensionMismatch {
            expected: scan.params.d(),
            found: d,
        });
    }
    let shape = grid.computational_shape();
    let reach: Vec<usize> = grid.n().iter().map(|&n| n / 2).collect();
    let window: Vec<usize> = reach.iter().map(|&r| 2 * r + 1).collect();
    let total: usize = window.iter().product();
    let h = grid.h().to_f64_lossy();

    // flat offsets into the field and integer squared radii, shared by every order
    let mut offsets = Vec::with_capacity(total);
    let mut radii = Vec::with_capacity(total);
    let params64 = MaternParams::new(
        scan.params.alpha().to_f64_lossy(),
        scan.params.kappa().to_f64_lossy(),
        scan.params.sigma2().to_f64_lossy(),
        d,
    )?;
    let mut w = vec![0; d];
    let mut idx = vec![0; d];
    for flat in 0..total {
        unravel(flat, &window, &mut w);
        let mut r2 = 0u64;
        for p in 0..d {
            let lag = w[p] as i64 - reach[p] as i64;
            idx[p] = lag.rem_euclid(shape[p] as i64) as usize;
            r2 += (lag * lag) as u64;
        }
        offsets.push(ravel(&idx, &shape));
        radii.push(r2);
    }
    let mut distinct = radii.clone();
    distinct.sort_unstable();
    distinct.dedup();
    let settings = QuadratureSettings::<f64>::default();
    let values: Vec<f64> = distinct
        .par_iter()
        .map(|&r2| {
            let r = (r2 as f64).sqrt() * h;
            match scan.target {
                CovarianceKind::Exact => exact_matern(&params64, r),
                CovarianceKind::BandLimited => {
                    let mut lag = vec![0.0; d];
                    lag[0] = r;
                    band_limited(&params64, &lag, &settings)
                }
                other => Err(Error::InvalidParameters(format!(
                    "error target must be exact or band_limited, not {other}"
                ))),
            }
        })
        .collect::<Result<_>>()?;
    let exact: Vec<f64> = radii
        .iter()
        .map(|r2| values[distinct.binary_search(r2).unwrap_or(0)])
        .collect();

    let jobs: Vec<(SymbolMode, usize)> = scan
        .modes
        .iter()
        .flat_map(|&m| scan.orders.iter().map(move |&k| (m, k)))
        .collect();
    jobs.par_iter()
        .map(|&(mode, order)| {
            let spec = taylor_coefficients(scan.params, order);
            let skip = |reason: String| OrderError {
                order,
                mode,
                max_abs_error: None,
                skipped: Some(reason),
            };
            if let Err(e) = spec.require_positive_everywhere() {
                return Ok(skip(e.to_string()));
            }
            let field = match discrete_covariance_field(&spec, grid.h(), &shape, mode) {
                Ok(f) => f,
                Err(e @ Error::NonPositiveSymbol { .. }) => return Ok(skip(e.to_string())),
                Err(e) => return Err(e),
            };
            let err = offsets
                .iter()
                .zip(&exact)
                .map(|(&o, &e)| (field[o].to_f64_lossy() - e).abs())
                .fold(0.0, f64::max);
            Ok(OrderError {
                order,
                mode,
                max_abs_error: Some(err),
                skipped: None,
            })
        })
        .collect()
}

/// Order with the smallest error among the evaluated ones.
pub fn argmin_order(rows: &[OrderError]) -> Option<usize> {
    rows.iter()
        .filter_map(|r| r.max_abs_error.map(|e| (r.order, e)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(k, _)| k)
}

/// Whether the evaluated errors strictly decrease up to `pivot` and
/// strictly increase after it (skipped orders are ignored).
pub fn is_u_shaped(rows: &[OrderError], pivot: usize) -> bool {
    let pts: Vec<(usize, f64)> = rows
        .iter()
        .filter_map(|r| r.max_abs_error.map(|e| (r.order, e)))
        .collect();
    let before: Vec<f64> = pts.iter().filter(|p| p.0 <= pivot).map(|p| p.1).collect();
    let after: Vec<f64> = pts.iter().filter(|p| p.0 >= pivot).map(|p| p.1).collect();
    before.len() >= 2
        && after.len() >= 2
        && before.windows(2).all(|w| w[1] < w[0])
        && after.windows(2).all(|w| w[1] > w[0])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityRow {
    pub side: f64,
    pub factor: usize,
    pub mode: SymbolMode,
    pub argmin: Option<usize>,
    pub errors: Vec<OrderError>,
}

/// Repeats [`error_vs_order`] over domain sides and extension factors.
pub fn sensitivity<T: Real>(
    params: MaternParams<T>,
    h: T,
    sides: &[T],
    factors: &[usize],
    orders: &[usize],
    modes: &[SymbolMode],
    target: CovarianceKind,
) -> Result<Vec<SensitivityRow>> {
    let mut rows = Vec::new();
    for &side in sides {
        let points = (side / h).round().to_usize().unwrap_or(0) + 1;
        for &factor in factors {
            let grid = LatticeGrid::cube(params.d(), h, points, Boundary::PeriodicExtended(factor))?;
            for &mode in modes {
                let errors = error_vs_order(&OrderScan {
                    params,
                    grid: grid.clone(),
                    orders: orders.to_vec(),
                    modes: vec![mode],
                    target,
                })?;
                rows.push(SensitivityRow {
                    side: side.to_f64_lossy(),
                    factor,
                    mode,
                    argmin: argmin_order(&errors),
                    errors,
                });
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow<T> {
    pub h: T,
    pub lag: T,
    pub discrete_value: T,
    pub continuous_value: T,
    pub abs_error: T,
    /// `discrete` at lattice lags, `interpolated` elsewhere.
    pub kind: CovarianceKind,
}

/// Lattice covariance against the truncated-Taylor covariance for each
/// step and lag along the first axis. Lags that are not multiples of `h`
/// use the interpolated covariance.
pub fn convergence<T: Real>(
    spec: &TaylorSpectrum<T>,
    steps: &[T],
    lags: &[T],
    mode: SymbolMode,
    settings: &QuadratureSettings<T>,
) -> Result<Vec<ConvergenceRow<T>>> {
    let d = spec.params().d();
    let along = |x: T| {
        let mut v = vec![T::zero(); d];
        v[0] = x;
        v
    };
    let continuous: Vec<T> = lags
        .iter()
        .map(|&x| taylor_covariance(spec, &along(x), settings))
        .collect::<Result<_>>()?;
    let jobs: Vec<(T, usize)> = steps
        .iter()
        .flat_map(|&h| (0..lags.len()).map(move |i| (h, i)))
        .collect();
    jobs.par_iter()
        .map(|&(h, i)| {
            let lag = lags[i];
            let (kind, value) = match lattice_index(&along(lag), h) {
                Ok(index) => (
                    CovarianceKind::Discrete,
                    discrete_covariance(spec, h, &index, mode, settings)?,
                ),
                Err(_) => (
                    CovarianceKind::Interpolated,
                    interpolated_covariance(spec, h, &along(lag), mode, settings)?,
                ),
            };
            Ok(ConvergenceRow {
                h,
                lag,
                discrete_value: value,
                continuous_value: continuous[i],
                abs_error: (value - continuous[i]).abs(),
                kind,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(order: usize, e: Option<f64>) -> OrderError {
        OrderError {
            order,
            mode: SymbolMode::Separable,
            max_abs_error: e,
            skipped: None,
        }
    }

    #[test]
    fn u_shape_ignores_skipped_orders() {
        let rows = vec![
            row(1, Some(1.0)),
            row(2, Some(0.1)),
            row(3, Some(0.05)),
            row(4, Some(0.01)),
            row(5, None),
            row(6, Some(0.02)),
            row(8, Some(0.03)),
        ];
        assert_eq!(argmin_order(&rows), Some(4));
        assert!(is_u_shaped(&rows, 4));
        assert!(!is_u_shaped(&rows, 3));
    }

    #[test]
    fn small_scan_runs() {
        let params = MaternParams::new(2.5, 1.0, 1.0, 1).unwrap();
        let grid = LatticeGrid::new(0.1, vec![101], Boundary::PeriodicExtended(2)).unwrap();
        let rows = error_vs_order(&OrderScan {
            params,
            grid,
            orders: vec![1, 2, 3, 4],
            modes: vec![SymbolMode::Separable],
            target: CovarianceKind::Exact,
        })
        .unwrap();
        assert_eq!(rows.len(), 4);
        // a_4 < 0 for α = 5/2
        assert!(rows[3].skipped.is_some());
        assert!(rows[0].max_abs_error.unwrap() > rows[1].max_abs_error.unwrap());
    }

    #[test]
    fn discrete_curve_matches_single_lags() {
        let params = MaternParams::new(1.5, 1.0, 1.0, 1).unwrap();
        let spec = taylor_coefficients(params, 4);
        let s = QuadratureSettings::default();
        let lags = [0.0, 0.5, 2.0];
        let curve = covariance_curve(
            &spec,
            CovarianceKind::Discrete,
            &lags,
            Some(0.1),
            SymbolMode::Separable,
            Boundary::PeriodicExtended(20),
            0,
            &s,
        )
        .unwrap();
        for (&x, &v) in lags.iter().zip(&curve) {
            let single =
                discrete_covariance(&spec, 0.1, &[(x / 0.1f64).round() as i64], SymbolMode::Separable, &s)
                    .unwrap();
            assert!((v - single).abs() < 1e-6, "lag {x}: {v} vs {single}");
        }
    }
}
