mod common;

use common::{axis_symbols, dense, naive_dft_real};
use taylor_gmrf::covariance::discrete_covariance;
use taylor_gmrf::lattice::{assemble_precision, difference_operator};
use taylor_gmrf::spectrum::taylor_coefficients;
use taylor_gmrf::{Boundary, LatticeGrid, MaternParams, QuadratureSettings, SymbolMode};

#[test]
fn term_symbols_match_a_naive_dft() {
    for shape in [vec![9usize], vec![5, 4]] {
        let grid = LatticeGrid::new(0.2, shape.clone(), Boundary::Periodic).unwrap();
        for k in 0..=4 {
            for mode in [SymbolMode::Separable, SymbolMode::LaplacianPower] {
                let gram = difference_operator(&grid, k, mode).gram();
                let total = gram.nrows();
                let first_row: Vec<f64> = (0..total).map(|c| gram.get(0, c)).collect();
                let eig = naive_dft_real(&first_row, &shape);
                for (m, &e) in eig.iter().enumerate() {
                    let s = axis_symbols(m, &shape);
                    let expected = match (k, mode) {
                        (0, _) => 1.0,
                        (_, SymbolMode::Separable) => s.iter().map(|x| x.powi(k as i32)).sum(),
                        (_, SymbolMode::LaplacianPower) => s.iter().sum::<f64>().powi(k as i32),
                    };
                    assert!((e - expected).abs() < 1e-10 * expected.max(1.0), "{shape:?} k={k} {mode:?}");
                }
            }
        }
    }
}

#[test]
fn two_dimensional_first_order_modes_agree() {
    let grid = LatticeGrid::new(0.1, vec![6, 6], Boundary::Periodic).unwrap();
    let a = difference_operator(&grid, 1, SymbolMode::Separable).gram();
    let b = difference_operator(&grid, 1, SymbolMode::LaplacianPower).gram();
    assert_eq!(a, b);
}

#[test]
fn precision_eigenvalues_match_the_symbol() {
    let params = MaternParams::new(1.5, 1.0, 1.0, 1).unwrap();
    let spec = taylor_coefficients(params, 4);
    let h = 0.1;
    let grid = LatticeGrid::new(h, vec![32], Boundary::Periodic).unwrap();
    let a = assemble_precision(&spec, &grid, SymbolMode::Separable).unwrap();
    let row: Vec<f64> = (0..32).map(|c| a.q.get(0, c)).collect();
    let eig = naive_dft_real(&row, &[32]);
    let coeffs = [1.0, 1.5, 0.375, -0.0625, 0.0234375];
    // entries reach ~1e7 at h = 0.1, so the low-frequency eigenvalues carry
    // cancellation error relative to the largest one, not to themselves
    let scale = eig.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    for (m, &e) in eig.iter().enumerate() {
        let s = axis_symbols(m, &[32])[0];
        let expected: f64 = h * coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c * h.powi(-2 * k as i32) * s.powi(k as i32))
            .sum::<f64>();
        assert!((e - expected).abs() < 1e-10 * scale, "m={m}");
    }
}

#[test]
fn dense_inverse_matches_lattice_covariance() {
    // n·h = 25 ≥ 20/κ: wrap-around below 1e-4
    let params = MaternParams::new(1.5, 1.0, 1.0, 1).unwrap();
    let spec = taylor_coefficients(params, 4);
    let h = 0.5;
    let n = 50;
    let grid = LatticeGrid::new(h, vec![n], Boundary::Periodic).unwrap();
    let a = assemble_precision(&spec, &grid, SymbolMode::Separable).unwrap();
    let inv = dense(&a.q.to_dense(), n).try_inverse().unwrap();
    let settings = QuadratureSettings::default();
    for lag in [0usize, 1, 2, 5] {
        let lattice = discrete_covariance(&spec, h, &[lag as i64], SymbolMode::Separable, &settings).unwrap();
        assert!((inv[(0, lag)] - lattice).abs() < 1e-4, "lag {lag}");
        assert!((inv[(7, 7 + lag)] - inv[(0, lag)]).abs() < 1e-12);
    }
}

#[test]
fn sparsity_grows_linearly() {
    let params = MaternParams::new(2.5, 1.0, 1.0, 2).unwrap();
    let spec = taylor_coefficients(params, 3);
    let nnz = |n: usize| {
        let grid = LatticeGrid::cube(2, 0.1, n, Boundary::Periodic).unwrap();
        assemble_precision(&spec, &grid, SymbolMode::Separable).unwrap().q.nnz()
    };
    assert_eq!(nnz(20) * 4, nnz(40));
}

#[test]
fn coordinate_export_round_trips() {
    let params = MaternParams::new(1.5, 1.0, 1.0, 1).unwrap();
    let spec = taylor_coefficients(params, 2);
    let grid = LatticeGrid::new(0.1, vec![5], Boundary::Periodic).unwrap();
    let a = assemble_precision(&spec, &grid, SymbolMode::Separable).unwrap();
    let mut buf = Vec::new();
    a.q.write_coordinate(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), format!("# 5 5 {}", a.q.nnz()));
    for line in lines {
        let parts: Vec<&str> = line.split_whitespace().collect();
        let (r, c, v): (usize, usize, f64) = (parts[0].parse().unwrap(), parts[1].parse().unwrap(), parts[2].parse().unwrap());
        assert_eq!(v, a.q.get(r, c));
    }
}
