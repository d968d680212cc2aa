use gat_core::credit::{DefaultModel, Intensity, LgdProcess};
use gat_core::math::{ks_pvalue, ks_statistic};
use gat_core::novikov::{
    novikov_mc, novikov_quadrature, q2_statistic, DensitySpec, LgdDensity, LgdLaw, NovikovSettings, Q2Form,
    QuadratureMode, QuadratureOutcome, QuadratureSettings, TauDensity, Verdict,
};
use gat_core::paths::simulate_brownian;
use gat_core::TimeGrid;
use statrs::distribution::{ChiSquared, ContinuousCDF};

#[test]
fn q2_follows_chi_squared_for_several_dimensions() {
    let grid = TimeGrid::uniform(2.0, 8).unwrap();
    for k in [1usize, 4, 16] {
        let w = simulate_brownian(&grid, 20_000, k, 100 + k as u64).unwrap();
        let q = q2_statistic(&w, 1.25, Q2Form::ChiSquared).unwrap();
        let law = ChiSquared::new(k as f64).unwrap();
        let d = ks_statistic(&q, |x| law.cdf(x), f64::INFINITY);
        assert!(ks_pvalue(d, q.len()) > 0.01, "K={k}: D={d}");
    }
}

const LAMBDA: f64 = 0.05;
const HORIZON: f64 = 40.0;

fn density(lgd: LgdDensity) -> DensitySpec {
    DensitySpec {
        lgd,
        tau: TauDensity::Intensity(Intensity::Constant(LAMBDA)),
        k: 4,
        tau_window: Some(HORIZON),
    }
}

#[test]
fn monte_carlo_and_quadrature_agree_on_the_capped_family() {
    let grid = TimeGrid::uniform(HORIZON, 160).unwrap();
    let model = DefaultModel::Intensity(Intensity::Constant(LAMBDA));
    let settings = NovikovSettings {
        k: 4,
        n_paths: 50_000,
        seed: 23,
        ..Default::default()
    };
    let mc = novikov_mc(&model, &LgdLaw::Capped { max: 0.4, cap: 0.1 }, &grid, &settings).unwrap();
    let quad = novikov_quadrature(
        &density(LgdDensity::Capped { max: 0.4, cap: 0.1 }),
        &QuadratureMode::Independent,
        &QuadratureSettings::default(),
    )
    .unwrap();
    let v = quad.value().expect("capped family converges");
    assert!((mc.value - v).abs() <= 3.0 * mc.std_error, "mc {} +- {} vs {v}", mc.value, mc.std_error);
}

#[test]
fn divergence_verdicts_agree_on_constant_lgd() {
    let grid = TimeGrid::uniform(HORIZON, 80).unwrap();
    let model = DefaultModel::Intensity(Intensity::Constant(LAMBDA));
    let settings = NovikovSettings {
        k: 4,
        n_paths: 100_000,
        seed: 5,
        ..Default::default()
    };
    let mc = novikov_mc(&model, &LgdLaw::Process(LgdProcess::Constant(0.4)), &grid, &settings).unwrap();
    let quad = novikov_quadrature(
        &density(LgdDensity::Point(0.4)),
        &QuadratureMode::Independent,
        &QuadratureSettings::default(),
    )
    .unwrap();
    assert_eq!(mc.verdict, Verdict::DivergenceEvidence);
    assert!(matches!(quad.outcome, QuadratureOutcome::Divergent { .. }));
}
