//! Invariants exercised through the public API only.

use gat_core::credit::{DefaultModel, Intensity, LgdProcess};
use gat_core::curvature::{zc_residual, CovariationMode, RateInput};
use gat_core::gauges::{
    convolve, gauge_transform, numeraire_change, portfolio_gauge, CashflowVector, Gauge, PortfolioNominals,
    TermStructureSurface,
};
use gat_core::linalg::Matrix;
use gat_core::novikov::{novikov_mc, LgdLaw, NovikovSettings};
use gat_core::paths::{Form, ItoSpec};
use gat_core::{PathEnsemble, TimeGrid};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn grid() -> TimeGrid {
    TimeGrid::uniform(1.0, 4).unwrap()
}

fn gauge(label: &str, n_paths: usize, a: f64, b: f64) -> Gauge {
    let d = PathEnsemble::from_fn(grid(), n_paths, 1, 0, |p, i, out| {
        out[0] = libm::exp(-a * i as f64 + 0.01 * p as f64)
    })
    .unwrap();
    let ts = TermStructureSurface::from_fn(grid(), 0.25, 17, n_paths, |p, t, tau| {
        libm::exp(-(b + 0.002 * p as f64 + 0.01 * t) * tau - 0.001 * tau * tau)
    })
    .unwrap();
    Gauge::new(label, d, ts).unwrap()
}

fn orthogonal(k: usize, seed: Vec<f64>) -> Matrix {
    let q = DMatrix::from_row_slice(k, k, &seed).qr().q();
    Matrix::from_rows(k, k, (0..k * k).map(|i| q[(i / k, i % k)]).collect())
}

fn term_structure_ok(g: &Gauge) -> bool {
    let ts = &g.term_structure;
    (0..ts.n_paths()).all(|p| {
        (0..ts.grid().len()).all(|i| ts.row(p, i)[0] == 1.0 && ts.row(p, i).iter().all(|x| *x > 0.0))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn zc_residual_ignores_orthogonal_rotation_of_sigma(
        sigma in proptest::collection::vec(-0.5f64..0.5, 12),
        rot in proptest::collection::vec(-1.0f64..1.0, 9),
        drift in proptest::collection::vec(-0.1f64..0.1, 4),
    ) {
        let q = orthogonal(3, rot);
        let s = Matrix::from_rows(4, 3, sigma);
        let series = |vol: Matrix| {
            let spec = ItoSpec::constant(Form::Geometric, vec![1.0; 4], drift.clone(), vol).unwrap();
            zc_residual(&spec, &RateInput::Constant(vec![0.01; 4]), CovariationMode::AnalyticZero, &grid(), 0, 7).unwrap()
        };
        let a = series(s.clone());
        let b = series(s.matmul(&q));
        for (x, y) in a.residual.iter().zip(&b.residual) {
            prop_assert!((x.value - y.value).abs() <= 1e-10 * (1.0 + x.value));
        }
        prop_assert_eq!(a.in_range, b.in_range);
    }

    #[test]
    fn operations_keep_unit_diagonal_and_positive_prices(
        w in proptest::collection::vec(0.0f64..1.0, 1..4),
        x in proptest::collection::vec(0.1f64..2.0, 2),
    ) {
        let (g, h) = (gauge("a", 3, 0.02, 0.03), gauge("b", 3, 0.05, 0.01));
        let pi = CashflowVector::new(0.25, w).unwrap();
        if let Ok(t) = gauge_transform(&g, &pi) {
            prop_assert!(term_structure_ok(&t));
        }
        let nominals = PortfolioNominals::constant(grid(), &x).unwrap();
        let p = portfolio_gauge(&[g, h], &nominals).unwrap();
        prop_assert!(term_structure_ok(&p));
    }

    #[test]
    fn transform_semigroup(
        a in proptest::collection::vec(0.05f64..0.5, 1..3),
        b in proptest::collection::vec(0.05f64..0.5, 1..3),
    ) {
        let g = gauge("a", 2, 0.02, 0.03);
        let (pa, pb) = (CashflowVector::new(0.25, a).unwrap(), CashflowVector::new(0.25, b).unwrap());
        let twice = gauge_transform(&gauge_transform(&g, &pa).unwrap(), &pb).unwrap();
        let once = gauge_transform(&g, &convolve(&pa, &pb).unwrap()).unwrap();
        for (u, v) in twice.term_structure.values().iter().zip(once.term_structure.values()) {
            prop_assert!((u - v).abs() <= 1e-12 * v.abs());
        }
        for p in 0..2 {
            for i in 0..grid().len() {
                let (u, v) = (twice.deflator_at(p, i), once.deflator_at(p, i));
                prop_assert!((u - v).abs() <= 1e-12 * v.abs());
            }
        }
    }
}

#[test]
fn numeraire_change_is_stable_under_repetition() {
    let market = [gauge("a", 3, 0.02, 0.03), gauge("b", 3, 0.05, 0.01), gauge("c", 3, -0.01, 0.02)];
    let once = numeraire_change(&market, 1).unwrap();
    let twice = numeraire_change(&once, 1).unwrap();
    for (x, y) in once.iter().zip(&twice) {
        for p in 0..3 {
            for i in 0..grid().len() {
                let (u, v) = (x.deflator_at(p, i), y.deflator_at(p, i));
                assert!((u - v).abs() <= 1e-12 * v.abs());
            }
        }
        assert_eq!(x.term_structure, y.term_structure);
    }
    // Deflator ratios do not depend on the numeraire.
    for p in 0..3 {
        for i in 0..grid().len() {
            let before = market[0].deflator_at(p, i) / market[2].deflator_at(p, i);
            let after = once[0].deflator_at(p, i) / once[2].deflator_at(p, i);
            assert!((before - after).abs() <= 1e-12 * before);
        }
    }
}

#[test]
fn larger_lgd_never_lowers_the_novikov_estimate() {
    let model = DefaultModel::Intensity(Intensity::Constant(0.2));
    let grid = TimeGrid::uniform(10.0, 40).unwrap();
    let settings = NovikovSettings {
        k: 8,
        n_paths: 4_000,
        seed: 11,
        ..Default::default()
    };
    let mut last = f64::NEG_INFINITY;
    for l in [0.0, 0.01, 0.05, 0.1, 0.2] {
        let e = novikov_mc(&model, &LgdLaw::Process(LgdProcess::Constant(l)), &grid, &settings).unwrap();
        assert!(e.log_value >= last, "LGD {l}: {} < {last}", e.log_value);
        last = e.log_value;
    }
    let mut last = f64::NEG_INFINITY;
    for max in [0.0, 0.1, 0.3, 0.6, 1.0] {
        let e = novikov_mc(&model, &LgdLaw::Capped { max, cap: 0.1 }, &grid, &settings).unwrap();
        assert!(e.log_value >= last);
        last = e.log_value;
    }
}
