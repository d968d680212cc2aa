//! Scenario analyses. Each returns its CSV tables, summary metrics and the
//! pass/fail outcome of every configured assertion.

use std::cell::OnceCell;
use std::path::Path;

use gat_core::credit::{
    corporate_bond_price, default_probability, simulate_default, thm1_residuals, CreditMarket, DefaultModel,
    Normalization, Thm1Settings,
};
use gat_core::curvature::{curvature_components, zc_point, zc_residual, CovariationMode, RateInput};
use gat_core::gauges::{convolve, gauge_transform, CashflowVector, Gauge, TermStructureSurface};
use gat_core::linalg::Matrix;
use gat_core::math::{chi2_cdf, ks_pvalue, ks_statistic, mean_variance};
use gat_core::novikov::{
    novikov_mc, novikov_quadrature, q2_statistic, tau_density_from_simulation, DensitySpec, NovikovSettings,
    Q2Form, QuadratureMode, QuadratureOutcome, QuadratureReport, QuadratureSettings, TauDensity, Verdict,
};
use gat_core::paths::{nelson_derivative, simulate_brownian, Conditioning, Form, ItoSpec, NelsonMode};
use gat_core::rng::{derive_seed, path_rng, Purpose};
use gat_core::{Estimate, PathEnsemble, TimeGrid};
use rand::Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::build;
use crate::error::{ErrorObject, Result};
use crate::row;
use crate::scenario::*;
use crate::table::{Cell, Table};

const SEMIGROUP_TAG: u64 = 0x400;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

impl Assertion {
    fn new(name: impl Into<String>, passed: bool, value: f64, target: Option<f64>, tolerance: Option<f64>) -> Self {
        Assertion {
            name: name.into(),
            passed,
            value,
            target,
            tolerance,
        }
    }

    /// `|estimate - target| <= k std_error + slack`.
    fn within(name: impl Into<String>, e: &Estimate, target: f64, k: f64, slack: f64) -> Self {
        Assertion::new(name, e.within(target, k, slack), e.value, Some(target), Some(k * e.std_error + slack))
    }
}

#[derive(Debug, Clone)]
pub struct Output {
    /// `(suffix, table)`; a single table takes no suffix.
    pub tables: Vec<(Option<&'static str>, Table)>,
    pub metrics: Value,
    pub assertions: Vec<Assertion>,
}

impl Output {
    fn single(table: Table, metrics: Value, assertions: Vec<Assertion>) -> Self {
        Output {
            tables: vec![(None, table)],
            metrics,
            assertions,
        }
    }
}

/// Shared, lazily built scenario objects.
pub struct Context<'a> {
    pub scenario: &'a Scenario,
    pub grid: TimeGrid,
    pub base: Option<&'a Path>,
    assets: OnceCell<std::result::Result<Vec<Gauge>, ErrorObject>>,
    market: OnceCell<std::result::Result<CreditMarket, ErrorObject>>,
}

impl<'a> Context<'a> {
    pub fn new(scenario: &'a Scenario, base: Option<&'a Path>) -> Result<Self> {
        Ok(Context {
            grid: build::grid(scenario)?,
            scenario,
            base,
            assets: OnceCell::new(),
            market: OnceCell::new(),
        })
    }

    fn assets(&self) -> Result<&[Gauge]> {
        self.assets
            .get_or_init(|| build::assets(self.scenario, &self.grid, self.base))
            .as_deref()
            .map_err(Clone::clone)
    }

    fn market(&self) -> Result<&CreditMarket> {
        self.market
            .get_or_init(|| {
                let assets = self.assets()?;
                build::credit_market(self.scenario, &self.grid, assets)
            })
            .as_ref()
            .map_err(Clone::clone)
    }

    fn n_paths(&self, a: &AnalysisSpec) -> usize {
        a.n_paths().unwrap_or(self.scenario.n_paths) as usize
    }

    fn seed(&self) -> u64 {
        self.scenario.seed
    }

    fn tol(&self) -> &Tolerances {
        &self.scenario.tolerances
    }
}

pub fn run(ctx: &Context, a: &AnalysisSpec) -> Result<Output> {
    let n = ctx.n_paths(a);
    match a {
        AnalysisSpec::Curvature(x) => curvature(ctx, x),
        AnalysisSpec::Zc(x) => zc(ctx, x, n),
        AnalysisSpec::CreditCheck(x) => credit_check(ctx, x, n),
        AnalysisSpec::Price(x) => price(ctx, x, n),
        AnalysisSpec::NovikovMc(x) => novikov_monte_carlo(ctx, x, n),
        AnalysisSpec::NovikovQuadrature(x) => novikov_quad(ctx, x, n),
        AnalysisSpec::NovikovCross(x) => novikov_cross(ctx, x, n),
        AnalysisSpec::Semigroup(x) => semigroup(ctx, x),
        AnalysisSpec::NelsonLaw(x) => nelson_law(ctx, x, n),
        AnalysisSpec::CoxLaw(x) => cox_law(ctx, x, n),
        AnalysisSpec::FirstPassage(x) => first_passage(ctx, x, n),
        AnalysisSpec::Q2Law(x) => q2_law(ctx, x, n),
    }
}

fn curvature(ctx: &Context, x: &CurvatureSpec) -> Result<Output> {
    let all = ctx.assets()?;
    let gauges: Vec<Gauge> = match &x.assets {
        None => all.to_vec(),
        Some(labels) => labels
            .iter()
            .map(|l| {
                all.iter()
                    .find(|g| &g.label == l)
                    .cloned()
                    .ok_or_else(|| ErrorObject::config(format!("unknown asset {l:?}")))
            })
            .collect::<Result<_>>()?,
    };
    let r = curvature_components(&gauges)?;
    let mut table = Table::new(&["t", "asset", "a_j", "std_error", "curvature_norm", "tolerance", "zc_residual"]);
    for (i, t) in r.times.iter().enumerate() {
        for (j, asset) in r.assets.iter().enumerate() {
            let zc = r.zc_residual.as_ref().map(|z| z[i]);
            table.push(row![
                *t,
                asset.as_str(),
                r.components[i][j],
                r.std_errors[i][j],
                r.curvature_norm[i],
                r.tolerance[i],
                zc
            ]);
        }
    }
    let excess = r
        .curvature_norm
        .iter()
        .zip(&r.tolerance)
        .map(|(n, t)| n - t)
        .fold(f64::NEG_INFINITY, f64::max);
    let max_tol = r.tolerance.iter().copied().fold(0.0, f64::max);
    let slack = ctx.tol().curvature_slack;
    let mut assertions = Vec::new();
    match x.expect {
        Some(CurvatureExpect::Flat) => {
            assertions.push(Assertion::new("flat", r.is_flat(slack), excess, Some(0.0), Some(slack)));
            assertions.push(Assertion::new(
                "estimator_tolerance",
                max_tol <= ctx.tol().estimator_max,
                max_tol,
                None,
                Some(ctx.tol().estimator_max),
            ));
        }
        Some(CurvatureExpect::Curved) => {
            assertions.push(Assertion::new("curved", excess > slack, excess, Some(0.0), Some(slack)));
        }
        None => {}
    }
    let metrics = json!({
        "assets": r.assets,
        "times": r.times.len(),
        "max_curvature_norm": r.max_norm(),
        "max_tolerance": max_tol,
        "max_excess": excess,
        "min_probes_used": r.probes_used.iter().min(),
    });
    Ok(Output::single(table, metrics, assertions))
}

fn matrix(rows: &[Vec<f64>]) -> Matrix {
    let cols = rows.first().map_or(0, Vec::len);
    Matrix::from_rows(rows.len(), cols, rows.iter().flatten().copied().collect())
}

fn joined(xs: &[f64]) -> String {
    xs.iter().map(|x| crate::table::fmt_f64(*x)).collect::<Vec<_>>().join(" ")
}

fn zc(ctx: &Context, x: &ZcSpec, n: usize) -> Result<Output> {
    let mut tables = Vec::new();
    let mut assertions = Vec::new();
    let mut metrics = serde_json::Map::new();
    if !x.points.is_empty() {
        let mut table = Table::new(&["point", "residual", "rank", "in_range", "expected", "market_price_of_risk"]);
        let mut worst: f64 = 0.0;
        for (j, p) in x.points.iter().enumerate() {
            let z = zc_point(&p.alpha, &matrix(&p.sigma), &p.r, p.covariation.as_deref())
                .map_err(|e| ErrorObject::from(e).at(format!("points[{j}]")))?;
            table.push(row![j, z.residual, z.rank, z.in_range, p.expected, joined(&z.market_price_of_risk)]);
            if let Some(e) = p.expected {
                let tol = ctx.tol().zc;
                assertions.push(Assertion::new(
                    format!("point_{j}"),
                    (z.residual - e).abs() <= tol,
                    z.residual,
                    Some(e),
                    Some(tol),
                ));
            }
            worst = worst.max(z.residual);
        }
        metrics.insert("points".into(), json!(x.points.len()));
        metrics.insert("max_point_residual".into(), json!(worst));
        tables.push((Some("points"), table));
    }
    if let Some(sr) = &x.series {
        let form = match sr.form {
            SdeForm::Geometric => Form::Geometric,
            SdeForm::Arithmetic => Form::Arithmetic,
        };
        let spec = ItoSpec::constant(form, sr.initial.clone(), sr.drift.clone(), matrix(&sr.vol))?;
        let mode = match sr.covariation {
            CovariationSpec::AnalyticZero => CovariationMode::AnalyticZero,
            CovariationSpec::Estimated => CovariationMode::Estimated,
        };
        let s = zc_residual(&spec, &RateInput::Constant(sr.rates.clone()), mode, &ctx.grid, n, ctx.seed())?;
        let mut table = Table::new(&["t", "residual", "std_error", "max_residual", "rank", "in_range"]);
        for (i, t) in s.times.iter().enumerate() {
            table.push(row![
                *t,
                s.residual[i].value,
                s.residual[i].std_error,
                s.max_residual[i],
                s.rank[i],
                s.in_range[i]
            ]);
        }
        metrics.insert("series_max_residual".into(), json!(s.max()));
        metrics.insert("series_all_in_range".into(), json!(s.all_in_range()));
        tables.push((Some("series"), table));
    }
    Ok(Output {
        tables,
        metrics: Value::Object(metrics),
        assertions,
    })
}

fn credit_check(ctx: &Context, x: &CreditCheckSpec, n: usize) -> Result<Output> {
    let market = ctx.market()?;
    let pairs: Vec<(f64, f64)> = x.pairs.iter().map(|[t, s]| (*t, *s)).collect();
    let settings = Thm1Settings {
        n_paths: n,
        seed: ctx.seed(),
        window: x.window,
    };
    let r = thm1_residuals(market, &pairs, &settings)?;
    let (k, exact) = (ctx.tol().std_errors, ctx.tol().exact);
    let mut table = Table::new(&["condition", "t", "s", "residual", "std_error", "pass"]);
    let mut assertions = Vec::new();
    for c in &r.spread {
        table.push(row!["spread", c.t, Cell::Empty, c.residual, 0.0, c.residual.abs() <= exact]);
        table.push(row![
            "spread_mc",
            c.t,
            Cell::Empty,
            c.residual_mc.value,
            c.residual_mc.std_error,
            c.residual_mc.within(0.0, k, 0.0)
        ]);
        match x.expect {
            Some(ConditionExpect::Hold) => {
                assertions.push(Assertion::new(
                    format!("spread_exact_t{}", c.t),
                    c.residual.abs() <= exact,
                    c.residual,
                    Some(0.0),
                    Some(exact),
                ));
                assertions.push(Assertion::within(format!("spread_mc_t{}", c.t), &c.residual_mc, 0.0, k, 0.0));
            }
            Some(ConditionExpect::Violated) => {
                let z = c.residual_mc.z_score(0.0).abs();
                assertions.push(Assertion::new(format!("spread_detected_t{}", c.t), z >= k, z, None, Some(k)));
            }
            None => {}
        }
    }
    for c in &r.survival {
        for (label, e) in [
            ("survival", &c.residual),
            ("survival_numeraire_rederived", &c.numeraire_rederived),
            ("survival_numeraire_printed", &c.numeraire_printed),
        ] {
            table.push(row![label, c.t, c.s, e.value, e.std_error, e.within(0.0, k, 0.0)]);
        }
        if x.expect == Some(ConditionExpect::Hold) {
            assertions.push(Assertion::within(format!("survival_t{}_s{}", c.t, c.s), &c.residual, 0.0, k, 0.0));
            assertions.push(Assertion::within(
                format!("survival_rederived_t{}_s{}", c.t, c.s),
                &c.numeraire_rederived,
                0.0,
                k,
                0.0,
            ));
        }
    }
    let spread: Vec<Value> = r
        .spread
        .iter()
        .map(|c| {
            json!({
                "t": c.t, "spread": c.spread, "required": c.required, "residual": c.residual,
                "hazard": c.hazard.value, "hazard_std_error": c.hazard.std_error,
                "residual_mc": c.residual_mc.value, "residual_mc_std_error": c.residual_mc.std_error,
            })
        })
        .collect();
    let survival: Vec<Value> = r
        .survival
        .iter()
        .map(|c| {
            json!({
                "t": c.t, "s": c.s, "lhs": c.lhs,
                "expectation": c.expectation.value, "expectation_exact": c.expectation_exact,
                "residual": c.residual.value, "residual_std_error": c.residual.std_error,
                "numeraire_printed": c.numeraire_printed.value,
                "numeraire_printed_std_error": c.numeraire_printed.std_error,
                "numeraire_rederived": c.numeraire_rederived.value,
                "numeraire_rederived_std_error": c.numeraire_rederived.std_error,
            })
        })
        .collect();
    Ok(Output::single(
        table,
        json!({ "spread": spread, "survival": survival, "n_paths": n }),
        assertions,
    ))
}

fn price(ctx: &Context, x: &PriceSpec, n: usize) -> Result<Output> {
    let market = ctx.market()?;
    let norm = match x.normalization {
        NormalizationSpec::Terminal => Normalization::Terminal,
        NormalizationSpec::Deflator => Normalization::Deflator,
    };
    let e = corporate_bond_price(market, x.t, x.s, norm, n, ctx.seed())?;
    let k = ctx.tol().std_errors;
    let pass = x.expected.map(|v| e.within(v, k, 0.0));
    let mut table = Table::new(&["t", "s", "price", "std_error", "expected", "pass"]);
    table.push(row![x.t, x.s, e.value, e.std_error, x.expected, pass.map_or(Cell::Empty, Cell::B)]);
    let assertions = x
        .expected
        .map(|v| vec![Assertion::within("price", &e, v, k, 0.0)])
        .unwrap_or_default();
    Ok(Output::single(
        table,
        json!({ "price": e.value, "std_error": e.std_error, "n_paths": n }),
        assertions,
    ))
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::FiniteEvidence => "finite_evidence",
        Verdict::DivergenceEvidence => "divergence_evidence",
        Verdict::Inconclusive => "inconclusive",
    }
}

fn q2_form(f: Q2FormSpec) -> Q2Form {
    match f {
        Q2FormSpec::ChiSquared => Q2Form::ChiSquared,
        Q2FormSpec::Printed => Q2Form::Printed,
    }
}

fn novikov_settings(ctx: &Context, k: i64, n: usize, form: Q2FormSpec) -> NovikovSettings {
    NovikovSettings {
        k: k as usize,
        n_paths: n,
        seed: ctx.seed(),
        form: q2_form(form),
        ..Default::default()
    }
}

fn novikov_monte_carlo(ctx: &Context, x: &NovikovMcSpec, n: usize) -> Result<Output> {
    let model = build::scenario_default(ctx.scenario)?;
    let law = build::lgd_law(ctx.scenario)?;
    let e = novikov_mc(&model, &law, &ctx.grid, &novikov_settings(ctx, x.k, n, x.form))?;
    let mut table = Table::new(&["samples", "log_running_mean"]);
    for (used, log_mean) in &e.trace {
        table.push(row![*used, *log_mean]);
    }
    let mut assertions = Vec::new();
    if let Some(want) = x.expect {
        let want = match want {
            VerdictExpect::DivergenceEvidence => Verdict::DivergenceEvidence,
            VerdictExpect::FiniteEvidence => Verdict::FiniteEvidence,
            VerdictExpect::Inconclusive => Verdict::Inconclusive,
        };
        assertions.push(Assertion::new(
            format!("verdict_{}", verdict_name(want)),
            e.verdict == want,
            e.tail.hill_index,
            Some(1.0),
            None,
        ));
    }
    let metrics = json!({
        "value": e.value, "std_error": e.std_error, "log_value": e.log_value,
        "tail_index": e.tail.hill_index, "tail_lower_bound": e.tail.lower_bound,
        "tail_upper_bound": e.tail.upper_bound, "tail_count": e.tail.tail_count,
        "verdict": verdict_name(e.verdict), "censored_fraction": e.censored_fraction,
        "n_samples": e.n_samples, "rejected": e.rejected, "k": x.k,
    });
    Ok(Output::single(table, metrics, assertions))
}

fn density_spec(ctx: &Context, k: i64, window: Option<f64>, n: usize) -> Result<DensitySpec> {
    let model = build::scenario_default(ctx.scenario)?;
    let tau = match &model {
        DefaultModel::Intensity(i) if i.is_deterministic() => TauDensity::Intensity(i.clone()),
        DefaultModel::Intensity(_) => tau_density_from_simulation(&model, &ctx.grid, n, ctx.seed())?,
        DefaultModel::Structural { .. } => {
            return Err(ErrorObject::config("quadrature needs an intensity default model").at("default_model"))
        }
    };
    Ok(DensitySpec {
        lgd: build::lgd_density(ctx.scenario)?,
        tau,
        k: k as u32,
        tau_window: window,
    })
}

fn outcome_name(o: &QuadratureOutcome) -> &'static str {
    match o {
        QuadratureOutcome::Converged { .. } => "converged",
        QuadratureOutcome::Divergent { .. } => "divergent",
        QuadratureOutcome::Unresolved => "unresolved",
    }
}

fn quadrature_table(r: &QuadratureReport) -> Table {
    let mut table = Table::new(&["level", "q_min", "log_truncated"]);
    for (j, (q, l)) in r.q_min.iter().zip(&r.log_truncated).enumerate() {
        table.push(row![j, *q, *l]);
    }
    table
}

fn novikov_quad(ctx: &Context, x: &NovikovQuadratureSpec, n: usize) -> Result<Output> {
    let spec = density_spec(ctx, x.k, x.tau_window, n)?;
    let settings = QuadratureSettings {
        halvings: x.halvings as usize,
        divergence_growth: x.divergence_growth,
        ..Default::default()
    };
    let r = novikov_quadrature(&spec, &QuadratureMode::Independent, &settings)?;
    let growth = r.log_truncated.last().copied().unwrap_or(0.0) - r.log_truncated.first().copied().unwrap_or(0.0);
    let monotone = r.log_truncated.windows(2).all(|w| w[1] >= w[0]);
    let mut assertions = Vec::new();
    match x.expect {
        Some(QuadratureExpect::Converged) => {
            assertions.push(Assertion::new(
                "converged",
                matches!(r.outcome, QuadratureOutcome::Converged { .. }),
                r.value().unwrap_or(f64::NAN),
                None,
                None,
            ));
        }
        Some(QuadratureExpect::Divergent) => {
            let ln_growth = x.divergence_growth.ln();
            assertions.push(Assertion::new(
                "divergence_certificate",
                matches!(r.outcome, QuadratureOutcome::Divergent { .. }) && monotone && growth > ln_growth,
                growth,
                None,
                Some(ln_growth),
            ));
        }
        None => {}
    }
    let metrics = json!({
        "outcome": outcome_name(&r.outcome), "value": r.value(), "log_growth": growth,
        "monotone": monotone, "t_max": r.t_max, "q_max": r.q_max,
        "integrals_converged": r.integrals_converged, "halvings": x.halvings, "k": x.k,
    });
    Ok(Output::single(quadrature_table(&r), metrics, assertions))
}

fn novikov_cross(ctx: &Context, x: &NovikovCrossSpec, n: usize) -> Result<Output> {
    let model = build::scenario_default(ctx.scenario)?;
    let law = build::lgd_law(ctx.scenario)?;
    let mc = novikov_mc(&model, &law, &ctx.grid, &novikov_settings(ctx, x.k, n, Q2FormSpec::ChiSquared))?;
    let spec = density_spec(ctx, x.k, Some(ctx.grid.horizon()), n)?;
    let r = novikov_quadrature(&spec, &QuadratureMode::Independent, &QuadratureSettings::default())?;
    let quad = r
        .value()
        .ok_or_else(|| ErrorObject::numerical(format!("quadrature did not converge ({})", outcome_name(&r.outcome))))?;
    let k = ctx.tol().std_errors;
    let e = Estimate {
        value: mc.value,
        std_error: mc.std_error,
    };
    let mut table = Table::new(&["method", "value", "std_error", "log_value"]);
    table.push(row!["monte_carlo", mc.value, mc.std_error, mc.log_value]);
    table.push(row!["quadrature", quad, 0.0, quad.ln()]);
    let metrics = json!({
        "monte_carlo": mc.value, "std_error": mc.std_error, "quadrature": quad,
        "difference": mc.value - quad, "z": e.z_score(quad),
        "verdict": verdict_name(mc.verdict), "censored_fraction": mc.censored_fraction, "k": x.k,
    });
    Ok(Output {
        tables: vec![(None, table), (Some("quadrature"), quadrature_table(&r))],
        metrics,
        assertions: vec![Assertion::within("agreement", &e, quad, k, 0.0)],
    })
}

fn max_rel(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / y.abs().max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}

fn semigroup(ctx: &Context, x: &SemigroupSpec) -> Result<Output> {
    let (lattice, paths, step) = (x.lattice as usize, x.gauge_paths as usize, x.step);
    let seed = derive_seed(ctx.seed(), SEMIGROUP_TAG);
    let grid = ctx.grid.clone();
    let n_m = 2 * lattice + 20;
    // Random gauge: per-path level, drift and curve shape.
    let mut rng = path_rng(seed, Purpose::Auxiliary, 0);
    let coef: Vec<[f64; 5]> = (0..paths)
        .map(|_| {
            [
                rng.random_range(0.5..2.0),
                rng.random_range(-0.05..0.05),
                rng.random_range(0.0..0.06),
                rng.random_range(-0.01..0.01),
                rng.random_range(0.0..0.002),
            ]
        })
        .collect();
    let deflator = PathEnsemble::from_fn(grid.clone(), paths, 1, seed, |p, i, o| {
        let t = grid.times()[i];
        o[0] = coef[p][0] * (coef[p][1] * t).exp();
    })?;
    let ts = TermStructureSurface::from_fn(grid.clone(), step, n_m, paths, |p, t, tau| {
        let c = &coef[p];
        (-(c[2] + c[3] * t) * tau - c[4] * tau * tau).exp()
    })?;
    let g = Gauge::new("random", deflator, ts)?;
    let mut table = Table::new(&["pair", "deflator_deviation", "term_structure_deviation"]);
    let mut worst: f64 = 0.0;
    for j in 0..x.pairs as usize {
        let mut rng = path_rng(seed, Purpose::Auxiliary, j + 1);
        let mut draw = || {
            let w: Vec<f64> = (0..lattice).map(|_| rng.random_range(0.05..1.0)).collect();
            CashflowVector::new(step, w)
        };
        let (pi, nu) = (draw()?, draw()?);
        let seq = gauge_transform(&gauge_transform(&g, &pi)?, &nu)?;
        let conv = gauge_transform(&g, &convolve(&pi, &nu)?)?;
        if seq.term_structure.n_maturities() != conv.term_structure.n_maturities() {
            return Err(gat_core::Error::Domain("composed transforms keep different maturity ranges".into()).into());
        }
        let dd = max_rel(seq.deflator.values(), conv.deflator.values());
        let dp = max_rel(seq.term_structure.values(), conv.term_structure.values());
        worst = worst.max(dd).max(dp);
        table.push(row![j, dd, dp]);
    }
    let tol = ctx.tol().semigroup;
    Ok(Output::single(
        table,
        json!({ "pairs": x.pairs, "lattice": x.lattice, "max_relative_deviation": worst }),
        vec![Assertion::new("semigroup", worst <= tol, worst, Some(0.0), Some(tol))],
    ))
}

fn nelson_law(ctx: &Context, x: &NelsonLawSpec, n: usize) -> Result<Output> {
    let w = simulate_brownian(&ctx.grid, n, 1, ctx.seed())?;
    let est = nelson_derivative(&w, x.t, NelsonMode::Mean, Conditioning::Present)?;
    let tol = ctx.tol().nelson_abs;
    let mut table = Table::new(&["q", "estimate", "std_error", "oracle", "abs_error", "pass"]);
    let mut worst: f64 = 0.0;
    for q in &x.points {
        let r = est.at(&[*q])?;
        let oracle = q / (2.0 * x.t);
        let err = (r.value[0] - oracle).abs();
        worst = worst.max(err);
        table.push(row![*q, r.value[0], r.std_error[0], oracle, err, err <= tol]);
    }
    Ok(Output::single(
        table,
        json!({ "t": x.t, "n_paths": n, "max_abs_error": worst, "bandwidth": est.bandwidth() }),
        vec![Assertion::new("nelson_law", worst <= tol, worst, Some(0.0), Some(tol))],
    ))
}

fn cox_law(ctx: &Context, x: &CoxLawSpec, n: usize) -> Result<Output> {
    let model = match &x.intensity {
        Some(d) => build::default_model(d).map_err(|e| e.at("intensity"))?,
        None => build::scenario_default(ctx.scenario)?,
    };
    let sim = simulate_default(&model, &ctx.grid, n, ctx.seed())?;
    let (d, p) = sim
        .cox_clock_ks()
        .ok_or_else(|| ErrorObject::config("cox_law needs an intensity default model"))?;
    let alpha = ctx.tol().ks_alpha;
    let censored = 1.0 - sim.default_fraction(ctx.grid.horizon()).value;
    let mut table = Table::new(&["n_paths", "censored_fraction", "ks_statistic", "p_value", "pass"]);
    table.push(row![n, censored, d, p, p >= alpha]);
    Ok(Output::single(
        table,
        json!({ "ks_statistic": d, "p_value": p, "censored_fraction": censored, "n_paths": n }),
        vec![Assertion::new("ks", p >= alpha, p, None, Some(alpha))],
    ))
}

fn first_passage(ctx: &Context, x: &FirstPassageSpec, n: usize) -> Result<Output> {
    let model = build::scenario_default(ctx.scenario)?;
    let DefaultModel::Structural { equity, barrier, .. } = &model else {
        return Err(ErrorObject::config("first_passage needs a structural model").at("default_model"));
    };
    let raw = DefaultModel::Structural {
        equity: equity.clone(),
        barrier: *barrier,
        bridge: false,
    };
    let k = ctx.tol().std_errors;
    let bound = model.grid_bias_bound();
    let mut table = Table::new(&["steps", "bridge", "estimate", "std_error", "bias_bound", "expected", "error"]);
    let mut assertions = Vec::new();
    let mut metrics = Vec::new();
    for &steps in &x.steps {
        let grid = TimeGrid::uniform(x.t, steps as usize)?;
        let with = default_probability(&model, 0.0, x.t, &grid, n, ctx.seed())?;
        let err = |e: &Estimate| x.expected.map(|v| e.value - v);
        table.push(row![steps, true, with.value, with.std_error, bound, x.expected, err(&with)]);
        // The unbridged estimate shows the discrete-monitoring bias; once is
        // enough.
        let without = if steps == x.steps[0] {
            let e = default_probability(&raw, 0.0, x.t, &grid, n, ctx.seed())?;
            table.push(row![steps, false, e.value, e.std_error, raw.grid_bias_bound(), x.expected, err(&e)]);
            Some(e)
        } else {
            None
        };
        if let Some(v) = x.expected {
            let slack = bound.unwrap_or(f64::INFINITY);
            assertions.push(Assertion::new(
                format!("first_passage_steps_{steps}"),
                bound.is_some() && with.within(v, k, slack),
                with.value,
                Some(v),
                Some(k * with.std_error + slack),
            ));
        }
        metrics.push(json!({
            "steps": steps, "estimate": with.value, "std_error": with.std_error,
            "raw_estimate": without.map(|e| e.value), "raw_std_error": without.map(|e| e.std_error),
        }));
    }
    for w in x.steps.windows(2) {
        if w[1] == 2 * w[0] {
            // The bound does not depend on the step, so it halves only when
            // it is zero (exact bridge).
            assertions.push(Assertion::new(
                format!("bias_bound_halves_{}_{}", w[0], w[1]),
                bound.is_some_and(|b| b <= 0.5 * b),
                bound.unwrap_or(f64::NAN),
                None,
                bound.map(|b| 0.5 * b),
            ));
        }
    }
    Ok(Output::single(
        table,
        json!({ "t": x.t, "bias_bound": bound, "refinements": metrics, "n_paths": n }),
        assertions,
    ))
}

fn q2_law(ctx: &Context, x: &Q2LawSpec, n: usize) -> Result<Output> {
    let grid = TimeGrid::uniform(x.t, 1)?;
    let sd = ctx.tol().std_errors;
    let alpha = ctx.tol().ks_alpha;
    let mut table = Table::new(&[
        "k", "mean", "mean_std_error", "variance", "variance_std_error", "ks_statistic", "p_value", "pass",
    ]);
    let mut assertions = Vec::new();
    for (j, &k) in x.ks.iter().enumerate() {
        let w = simulate_brownian(&grid, n, k as usize, derive_seed(ctx.seed(), j as u64))?;
        let q = q2_statistic(&w, x.t, q2_form(x.form))?;
        let (m, v) = mean_variance(&q);
        let m4 = q.iter().map(|y| (y - m).powi(4)).sum::<f64>() / n as f64;
        let mean = Estimate {
            value: m,
            std_error: (v / n as f64).sqrt(),
        };
        let var = Estimate {
            value: v,
            std_error: ((m4 - v * v).max(0.0) / n as f64).sqrt(),
        };
        let d = ks_statistic(&q, |y| chi2_cdf(y, k as u32), f64::INFINITY);
        let p = ks_pvalue(d, n);
        let kf = k as f64;
        let ok = [mean.within(kf, sd, 0.0), var.within(2.0 * kf, sd, 0.0), p >= alpha];
        table.push(row![k, m, mean.std_error, v, var.std_error, d, p, ok.iter().all(|b| *b)]);
        assertions.push(Assertion::within(format!("mean_k{k}"), &mean, kf, sd, 0.0));
        assertions.push(Assertion::within(format!("variance_k{k}"), &var, 2.0 * kf, sd, 0.0));
        assertions.push(Assertion::new(format!("ks_k{k}"), ok[2], p, None, Some(alpha)));
    }
    Ok(Output::single(table, json!({ "t": x.t, "n_paths": n }), assertions))
}
