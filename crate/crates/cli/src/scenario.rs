//! Scenario files: the JSON schema and the static checks behind `validate`.
//!
//! Nothing in this module simulates. Counts are read as signed integers so a
//! negative value becomes a named violation instead of a parse error.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{ErrorKind, ErrorObject};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// Mandatory; there is no clock-based default.
    pub seed: u64,
    pub n_paths: i64,
    pub grid: GridSpec,
    #[serde(default)]
    pub market: Option<MarketSpec>,
    #[serde(default)]
    pub default_model: Option<DefaultSpec>,
    #[serde(default)]
    pub lgd: Option<LgdSpec>,
    #[serde(default)]
    pub beta: Option<BetaSpec>,
    #[serde(default)]
    pub measure: Measure,
    pub analyses: Vec<AnalysisSpec>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub horizon: f64,
    pub steps: i64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SdeForm {
    #[default]
    Geometric,
    Arithmetic,
}

/// Scalar constant-coefficient Itô process.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SdeSpec {
    #[serde(default)]
    pub form: SdeForm,
    pub initial: f64,
    pub drift: f64,
    pub vol: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketSpec {
    pub maturity_step: f64,
    pub n_maturities: i64,
    pub assets: Vec<AssetSpec>,
    #[serde(default)]
    pub gov: Option<String>,
    #[serde(default)]
    pub corp: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum AssetSpec {
    /// Flat term structure and a deflator constant in time. A positive
    /// `dispersion` draws a lognormal level per path.
    Flat {
        label: String,
        rate: f64,
        deflator: f64,
        #[serde(default)]
        dispersion: f64,
    },
    /// Flat term structure with a simulated deflator.
    Ito { label: String, rate: f64, deflator: SdeSpec },
    /// Deflator in the binary ensemble format, term structure in the long
    /// CSV format. Paths are relative to the scenario file.
    File {
        label: String,
        deflator: PathBuf,
        term_structure: PathBuf,
    },
}

impl AssetSpec {
    pub fn label(&self) -> &str {
        match self {
            AssetSpec::Flat { label, .. } | AssetSpec::Ito { label, .. } | AssetSpec::File { label, .. } => label,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DefaultSpec {
    Constant { rate: f64 },
    Affine { intercept: f64, slope: f64 },
    PiecewiseConstant { breaks: Vec<f64>, rates: Vec<f64> },
    Stochastic { sde: SdeSpec },
    Structural {
        equity: SdeSpec,
        barrier: f64,
        #[serde(default = "yes")]
        bridge: bool,
    },
}

fn yes() -> bool {
    true
}

impl DefaultSpec {
    pub fn is_structural(&self) -> bool {
        matches!(self, DefaultSpec::Structural { .. })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum LgdSpec {
    Constant { value: f64 },
    Uniform { lo: f64, hi: f64 },
    Ito { sde: SdeSpec },
    /// Only meaningful for the Novikov analyses.
    Capped { max: f64, cap: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum BetaSpec {
    Constant { value: f64 },
    Ito { sde: SdeSpec },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    #[default]
    Pricing,
    Physical,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Monte Carlo acceptance width in standard errors.
    pub std_errors: f64,
    /// Deterministic residuals that should vanish to rounding.
    pub exact: f64,
    pub zc: f64,
    pub semigroup: f64,
    pub nelson_abs: f64,
    pub ks_alpha: f64,
    pub curvature_slack: f64,
    /// Largest acceptable curvature tolerance, per year.
    pub estimator_max: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            std_errors: 3.0,
            exact: 1e-14,
            zc: 1e-6,
            semigroup: 1e-12,
            nelson_abs: 0.05,
            ks_alpha: 0.01,
            curvature_slack: 0.0,
            estimator_max: 1e-2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurvatureExpect {
    Flat,
    Curved,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionExpect {
    Hold,
    Violated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictExpect {
    DivergenceEvidence,
    FiniteEvidence,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureExpect {
    Converged,
    Divergent,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Q2FormSpec {
    #[default]
    ChiSquared,
    Printed,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationSpec {
    #[default]
    Terminal,
    Deflator,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovariationSpec {
    #[default]
    AnalyticZero,
    Estimated,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZcPointSpec {
    pub alpha: Vec<f64>,
    /// Rows of the N x K volatility matrix.
    pub sigma: Vec<Vec<f64>>,
    pub r: Vec<f64>,
    #[serde(default)]
    pub covariation: Option<Vec<f64>>,
    #[serde(default)]
    pub expected: Option<f64>,
}

/// Constant-coefficient N-asset price dynamics for a residual series.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZcSeriesSpec {
    #[serde(default)]
    pub form: SdeForm,
    pub initial: Vec<f64>,
    pub drift: Vec<f64>,
    pub vol: Vec<Vec<f64>>,
    pub rates: Vec<f64>,
    #[serde(default)]
    pub covariation: CovariationSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnalysisSpec {
    Curvature(CurvatureSpec),
    Zc(ZcSpec),
    CreditCheck(CreditCheckSpec),
    Price(PriceSpec),
    NovikovMc(NovikovMcSpec),
    NovikovQuadrature(NovikovQuadratureSpec),
    NovikovCross(NovikovCrossSpec),
    Semigroup(SemigroupSpec),
    NelsonLaw(NelsonLawSpec),
    CoxLaw(CoxLawSpec),
    FirstPassage(FirstPassageSpec),
    Q2Law(Q2LawSpec),
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurvatureSpec {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub assets: Option<Vec<String>>,
    #[serde(default)]
    pub expect: Option<CurvatureExpect>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZcSpec {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub points: Vec<ZcPointSpec>,
    #[serde(default)]
    pub series: Option<ZcSeriesSpec>,
    #[serde(default)]
    pub n_paths: Option<i64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreditCheckSpec {
    #[serde(default)]
    pub name: Option<String>,
    pub pairs: Vec<[f64; 2]>,
    #[serde(default = "default_window")]
    pub window: f64,
    #[serde(default)]
    pub expect: Option<ConditionExpect>,
    #[serde(default)]
    pub n_paths: Option<i64>,
}

fn default_window() -> f64 {
    5.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriceSpec {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub t: f64,
    pub s: f64,
    #[serde(default)]
    pub normalization: NormalizationSpec,
    #[serde(default)]
    pub expected: Option<f64>,
    #[serde(default)]
    pub n_paths: Option<i64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NovikovMcSpec {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default = "default_k")]
    pub k: i64,
    #[serde(default)]
    pub form: Q2FormSpec,
    #[serde(default)]
    pub expect: Option<VerdictExpect>,
    #[serde(default)]
    pub n_paths: Option<i64>,
}

fn default_k() -> i64 {
    4
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NovikovQuadratureSpec {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default = "default_k")]
    pub k: i64,
    /// Condition on default before this time; `None` integrates all of
    /// `(0, inf)`.
    #[serde(default)]
    pub tau_window: Option<f64>,
    #[serde(default = "default_halvings")]
    pub halvings: i64,
    #[serde(default = "default_growth")]
    pub divergence_growth: f64,
    #[serde(default)]
    pub expect: Option<QuadratureExpect>,
    /// Paths behind a tabulated density for stochastic intensities.
    #[serde(default)]
    pub n_paths: Option<i64>,
}

fn default_halvings() -> i64 {
    20
}

fn default_growth() -> f64 {
    1e6
}

/// Monte Carlo and quadrature on the same law, conditioned on default
/// within the grid horizon.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NovikovCrossSpec {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default = "default_k")]
    pub k: i64,
    #[serde(default)]
    pub n_paths: Option<i64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SemigroupSpec {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default = "default_pairs")]
    pub pairs: i64,
    /// Points per cashflow vector.
    #[serde(default = "default_lattice")]
    pub lattice: i64,
    #[serde(default = "default_step")]
    pub step: f64,
    /// Paths of the random gauge.
    #[serde(default = "default_gauge_paths")]
    pub gauge_paths: i64,
}

fn default_pairs() -> i64 {
    100
}

fn default_lattice() -> i64 {
    20
}

fn default_step() -> f64 {
    0.25
}

fn default_gauge_paths() -> i64 {
    4
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NelsonLawSpec {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default = "one")]
    pub t: f64,
    #[serde(default = "default_nelson_points")]
    pub points: Vec<f64>,
    #[serde(default)]
    pub n_paths: Option<i64>,
}

fn one() -> f64 {
    1.0
}

fn default_nelson_points() -> Vec<f64> {
    (0..10).map(|i| -2.0 + 4.0 * i as f64 / 9.0).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoxLawSpec {
    #[serde(default)]
    pub name: Option<String>,
    /// Overrides the scenario default model.
    #[serde(default)]
    pub intensity: Option<DefaultSpec>,
    #[serde(default)]
    pub n_paths: Option<i64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FirstPassageSpec {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default = "one")]
    pub t: f64,
    #[serde(default)]
    pub expected: Option<f64>,
    /// Grid refinements on `[0, t]`.
    #[serde(default = "default_refinements")]
    pub steps: Vec<i64>,
    #[serde(default)]
    pub n_paths: Option<i64>,
}

fn default_refinements() -> Vec<i64> {
    vec![1000, 2000]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Q2LawSpec {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default = "default_ks")]
    pub ks: Vec<i64>,
    #[serde(default = "one")]
    pub t: f64,
    #[serde(default)]
    pub form: Q2FormSpec,
    #[serde(default)]
    pub n_paths: Option<i64>,
}

fn default_ks() -> Vec<i64> {
    vec![1, 4, 16]
}

impl AnalysisSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            AnalysisSpec::Curvature(_) => "curvature",
            AnalysisSpec::Zc(_) => "zc",
            AnalysisSpec::CreditCheck(_) => "credit_check",
            AnalysisSpec::Price(_) => "price",
            AnalysisSpec::NovikovMc(_) => "novikov_mc",
            AnalysisSpec::NovikovQuadrature(_) => "novikov_quadrature",
            AnalysisSpec::NovikovCross(_) => "novikov_cross",
            AnalysisSpec::Semigroup(_) => "semigroup",
            AnalysisSpec::NelsonLaw(_) => "nelson_law",
            AnalysisSpec::CoxLaw(_) => "cox_law",
            AnalysisSpec::FirstPassage(_) => "first_passage",
            AnalysisSpec::Q2Law(_) => "q2_law",
        }
    }

    fn explicit_name(&self) -> Option<&str> {
        match self {
            AnalysisSpec::Curvature(a) => a.name.as_deref(),
            AnalysisSpec::Zc(a) => a.name.as_deref(),
            AnalysisSpec::CreditCheck(a) => a.name.as_deref(),
            AnalysisSpec::Price(a) => a.name.as_deref(),
            AnalysisSpec::NovikovMc(a) => a.name.as_deref(),
            AnalysisSpec::NovikovQuadrature(a) => a.name.as_deref(),
            AnalysisSpec::NovikovCross(a) => a.name.as_deref(),
            AnalysisSpec::Semigroup(a) => a.name.as_deref(),
            AnalysisSpec::NelsonLaw(a) => a.name.as_deref(),
            AnalysisSpec::CoxLaw(a) => a.name.as_deref(),
            AnalysisSpec::FirstPassage(a) => a.name.as_deref(),
            AnalysisSpec::Q2Law(a) => a.name.as_deref(),
        }
    }

    /// Output stem: the explicit name, else the kind.
    pub fn name(&self) -> String {
        self.explicit_name().unwrap_or(self.kind()).to_string()
    }

    pub fn n_paths(&self) -> Option<i64> {
        match self {
            AnalysisSpec::Zc(a) => a.n_paths,
            AnalysisSpec::CreditCheck(a) => a.n_paths,
            AnalysisSpec::Price(a) => a.n_paths,
            AnalysisSpec::NovikovMc(a) => a.n_paths,
            AnalysisSpec::NovikovQuadrature(a) => a.n_paths,
            AnalysisSpec::NovikovCross(a) => a.n_paths,
            AnalysisSpec::NelsonLaw(a) => a.n_paths,
            AnalysisSpec::CoxLaw(a) => a.n_paths,
            AnalysisSpec::FirstPassage(a) => a.n_paths,
            AnalysisSpec::Q2Law(a) => a.n_paths,
            AnalysisSpec::Curvature(_) | AnalysisSpec::Semigroup(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub severity: Severity,
    pub field: String,
    pub message: String,
}

/// Result of `validate`: parse status plus every violation found.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub file: String,
    pub valid: bool,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn errors(&self) -> impl Iterator<Item = &Violation> {
        self.violations.iter().filter(|v| v.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Violation> {
        self.violations.iter().filter(|v| v.severity == Severity::Warning)
    }
}

/// Parses scenario text; structural errors name the offending field.
pub fn parse(text: &str) -> Result<Scenario, ErrorObject> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ErrorObject {
            kind: ErrorKind::Configuration,
            field: (path != ".").then_some(path),
            analysis: None,
            message: e.inner().to_string(),
        }
    })
}

pub fn load(path: &Path) -> Result<Scenario, ErrorObject> {
    let text = std::fs::read_to_string(path).map_err(|e| ErrorObject {
        kind: ErrorKind::Configuration,
        field: None,
        analysis: None,
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    parse(&text)
}

/// Parses and checks a scenario file without executing anything.
pub fn validate_file(path: &Path) -> ValidationReport {
    let file = path.display().to_string();
    let violations = match load(path) {
        Ok(s) => check(&s, path.parent()),
        Err(e) => vec![Violation {
            severity: Severity::Error,
            field: e.field.unwrap_or_default(),
            message: e.message,
        }],
    };
    ValidationReport {
        file,
        valid: !violations.iter().any(|v| v.severity == Severity::Error),
        violations,
    }
}

struct Checker {
    out: Vec<Violation>,
}

impl Checker {
    fn error(&mut self, field: impl Into<String>, message: impl Into<String>) {
        self.out.push(Violation {
            severity: Severity::Error,
            field: field.into(),
            message: message.into(),
        });
    }

    fn warn(&mut self, field: impl Into<String>, message: impl Into<String>) {
        self.out.push(Violation {
            severity: Severity::Warning,
            field: field.into(),
            message: message.into(),
        });
    }

    fn finite(&mut self, field: &str, x: f64) -> bool {
        if !x.is_finite() {
            self.error(field, "must be finite");
            return false;
        }
        true
    }

    fn positive(&mut self, field: &str, x: f64) {
        if !(x > 0.0) || !x.is_finite() {
            self.error(field, "must be positive and finite");
        }
    }

    fn count(&mut self, field: &str, n: i64) {
        if n < 1 {
            self.error(field, format!("must be at least 1, got {n}"));
        }
    }

    fn unit(&mut self, field: &str, x: f64) {
        if !(0.0..=1.0).contains(&x) {
            self.error(field, "lgd outside [0,1]");
        }
    }

    fn sde(&mut self, field: &str, s: &SdeSpec) {
        self.finite(&format!("{field}.initial"), s.initial);
        self.finite(&format!("{field}.drift"), s.drift);
        self.finite(&format!("{field}.vol"), s.vol);
        if s.form == SdeForm::Geometric && !(s.initial > 0.0) {
            self.error(format!("{field}.initial"), "geometric process needs a positive initial value");
        }
    }

    fn time_in(&mut self, field: &str, t: f64, horizon: f64) {
        if !(0.0..=horizon * (1.0 + 1e-12)).contains(&t) {
            self.error(field, format!("time {t} outside the grid [0, {horizon}]"));
        }
    }
}

/// Every static violation of `s`. `base` resolves relative file paths.
pub fn check(s: &Scenario, base: Option<&Path>) -> Vec<Violation> {
    let mut c = Checker { out: Vec::new() };
    if s.name.trim().is_empty() {
        c.error("name", "must not be empty");
    }
    c.count("n_paths", s.n_paths);
    c.positive("grid.horizon", s.grid.horizon);
    c.count("grid.steps", s.grid.steps);
    let horizon = s.grid.horizon;

    let mut labels = BTreeSet::new();
    if let Some(m) = &s.market {
        c.positive("market.maturity_step", m.maturity_step);
        c.count("market.n_maturities", m.n_maturities);
        if m.assets.is_empty() {
            c.error("market.assets", "market has no assets");
        }
        for (i, a) in m.assets.iter().enumerate() {
            let f = format!("market.assets[{i}]");
            if !labels.insert(a.label().to_string()) {
                c.error(format!("{f}.label"), format!("duplicate label {:?}", a.label()));
            }
            match a {
                AssetSpec::Flat {
                    rate,
                    deflator,
                    dispersion,
                    ..
                } => {
                    c.finite(&format!("{f}.rate"), *rate);
                    c.positive(&format!("{f}.deflator"), *deflator);
                    if !(*dispersion >= 0.0) || !dispersion.is_finite() {
                        c.error(format!("{f}.dispersion"), "must be non-negative and finite");
                    }
                }
                AssetSpec::Ito { rate, deflator, .. } => {
                    c.finite(&format!("{f}.rate"), *rate);
                    c.sde(&format!("{f}.deflator"), deflator);
                    if deflator.form == SdeForm::Arithmetic {
                        c.warn(
                            format!("{f}.deflator.form"),
                            "arithmetic deflators can become non-positive",
                        );
                    }
                }
                AssetSpec::File {
                    deflator,
                    term_structure,
                    ..
                } => {
                    for (name, p) in [("deflator", deflator), ("term_structure", term_structure)] {
                        let full = base.map(|b| b.join(p)).unwrap_or_else(|| p.clone());
                        if !full.is_file() {
                            c.error(format!("{f}.{name}"), format!("file {} not found", full.display()));
                        }
                    }
                }
            }
        }
        for (field, label) in [("market.gov", &m.gov), ("market.corp", &m.corp)] {
            if let Some(l) = label {
                if !labels.contains(l) {
                    c.error(field, format!("unknown asset {l:?}"));
                }
            }
        }
    }

    if let Some(d) = &s.default_model {
        check_default(&mut c, "default_model", d, horizon);
    }
    if let Some(l) = &s.lgd {
        match l {
            LgdSpec::Constant { value } => c.unit("lgd.value", *value),
            LgdSpec::Uniform { lo, hi } => {
                c.unit("lgd.lo", *lo);
                c.unit("lgd.hi", *hi);
                if lo > hi {
                    c.error("lgd", "uniform LGD needs lo <= hi");
                }
            }
            LgdSpec::Ito { sde } => c.sde("lgd.sde", sde),
            LgdSpec::Capped { max, cap } => {
                c.unit("lgd.max", *max);
                c.positive("lgd.cap", *cap);
            }
        }
    }
    if let Some(b) = &s.beta {
        match b {
            BetaSpec::Constant { value } => c.positive("beta.value", *value),
            BetaSpec::Ito { sde } => {
                c.sde("beta.sde", sde);
                if sde.form == SdeForm::Arithmetic {
                    c.error("beta.sde.form", "pricing kernel must stay positive; use the geometric form");
                }
            }
        }
    }
    let t = &s.tolerances;
    for (name, v) in [
        ("std_errors", t.std_errors),
        ("exact", t.exact),
        ("zc", t.zc),
        ("semigroup", t.semigroup),
        ("nelson_abs", t.nelson_abs),
        ("ks_alpha", t.ks_alpha),
        ("estimator_max", t.estimator_max),
    ] {
        c.positive(&format!("tolerances.{name}"), v);
    }
    if !(t.curvature_slack >= 0.0) {
        c.error("tolerances.curvature_slack", "must be non-negative");
    }

    if s.analyses.is_empty() {
        c.error("analyses", "no analysis requested");
    }
    let mut names = BTreeSet::new();
    for (i, a) in s.analyses.iter().enumerate() {
        let f = format!("analyses[{i}]");
        if !names.insert(a.name()) {
            c.error(format!("{f}.name"), format!("duplicate analysis name {:?}", a.name()));
        }
        if let Some(n) = a.n_paths() {
            c.count(&format!("{f}.n_paths"), n);
        }
        check_analysis(&mut c, &f, a, s, &labels);
    }
    c.out
}

fn check_default(c: &mut Checker, f: &str, d: &DefaultSpec, horizon: f64) {
    match d {
        DefaultSpec::Constant { rate } => {
            if !(*rate >= 0.0) || !rate.is_finite() {
                c.error(format!("{f}.rate"), "intensity must be finite and non-negative");
            }
        }
        DefaultSpec::Affine { intercept, slope } => {
            if c.finite(&format!("{f}.intercept"), *intercept)
                && c.finite(&format!("{f}.slope"), *slope)
                && (*intercept < 0.0 || intercept + slope * horizon < 0.0)
            {
                c.error(f, format!("affine intensity becomes negative on [0, {horizon}]"));
            }
        }
        DefaultSpec::PiecewiseConstant { breaks, rates } => {
            if rates.len() != breaks.len() + 1 {
                c.error(format!("{f}.rates"), "needs one more rate than breaks");
            }
            if breaks.windows(2).any(|w| !(w[1] > w[0])) || breaks.first().is_some_and(|b| !(*b > 0.0)) {
                c.error(format!("{f}.breaks"), "must be positive and increasing");
            }
            if rates.iter().any(|r| !(*r >= 0.0) || !r.is_finite()) {
                c.error(format!("{f}.rates"), "must be finite and non-negative");
            }
        }
        DefaultSpec::Stochastic { sde } => {
            c.sde(&format!("{f}.sde"), sde);
            if !(sde.initial >= 0.0) {
                c.error(format!("{f}.sde.initial"), "initial intensity must be non-negative");
            }
        }
        DefaultSpec::Structural { equity, barrier, .. } => {
            c.sde(&format!("{f}.equity"), equity);
            c.finite(&format!("{f}.barrier"), *barrier);
            if *barrier >= equity.initial {
                c.warn(
                    format!("{f}.barrier"),
                    "barrier >= initial equity: immediate default on every path",
                );
            }
        }
    }
}

fn check_analysis(c: &mut Checker, f: &str, a: &AnalysisSpec, s: &Scenario, labels: &BTreeSet<String>) {
    let horizon = s.grid.horizon;
    let need_market = |c: &mut Checker, what: &str| {
        if s.market.is_none() {
            c.error(f, format!("{what} needs a market"));
        }
    };
    let need_credit = |c: &mut Checker, what: &str| match &s.market {
        Some(m) if m.gov.is_some() && m.corp.is_some() => {}
        _ => c.error(f, format!("{what} needs market.gov and market.corp")),
    };
    let need_default = |c: &mut Checker, what: &str| {
        if s.default_model.is_none() {
            c.error(f, format!("{what} needs a default_model"));
        }
    };
    let need_process_lgd = |c: &mut Checker, what: &str| match &s.lgd {
        None => c.error(f, format!("{what} needs an lgd")),
        Some(LgdSpec::Capped { .. }) => c.error(f, format!("{what} needs an LGD process; capped LGD is only defined for the Novikov analyses")),
        Some(_) => {}
    };
    let need_density_lgd = |c: &mut Checker, what: &str| match &s.lgd {
        None => c.error(f, format!("{what} needs an lgd")),
        Some(LgdSpec::Ito { .. }) => c.error(f, format!("{what} has no density for an Itô LGD")),
        Some(_) => {}
    };
    let need_intensity = |c: &mut Checker, what: &str| {
        if s.default_model.as_ref().is_some_and(DefaultSpec::is_structural) {
            c.error(f, format!("{what} needs an intensity default model"));
        }
    };
    let k_ok = |c: &mut Checker, k: i64| {
        if !(1..=4096).contains(&k) {
            c.error(format!("{f}.k"), format!("K must be in [1, 4096], got {k}"));
        }
    };
    match a {
        AnalysisSpec::Curvature(x) => {
            need_market(c, "curvature");
            if let Some(list) = &x.assets {
                for (j, l) in list.iter().enumerate() {
                    if !labels.contains(l) {
                        c.error(format!("{f}.assets[{j}]"), format!("unknown asset {l:?}"));
                    }
                }
            }
        }
        AnalysisSpec::Zc(x) => {
            if x.points.is_empty() && x.series.is_none() {
                c.error(f, "zc needs points or a series");
            }
            for (j, p) in x.points.iter().enumerate() {
                let g = format!("{f}.points[{j}]");
                let n = p.alpha.len();
                if n == 0 || p.sigma.len() != n || p.r.len() != n {
                    c.error(&g, "alpha, sigma rows and r must have the same positive length");
                }
                let k = p.sigma.first().map_or(0, Vec::len);
                if k == 0 || p.sigma.iter().any(|row| row.len() != k) {
                    c.error(format!("{g}.sigma"), "sigma rows must have equal positive length");
                }
                if p.covariation.as_ref().is_some_and(|v| v.len() != n) {
                    c.error(format!("{g}.covariation"), "must have one entry per asset");
                }
                let all = p.alpha.iter().chain(&p.r).chain(p.sigma.iter().flatten());
                if all.clone().any(|v| !v.is_finite()) {
                    c.error(&g, "inputs must be finite");
                }
            }
            if let Some(sr) = &x.series {
                let g = format!("{f}.series");
                let n = sr.initial.len();
                if n == 0 || sr.drift.len() != n || sr.vol.len() != n || sr.rates.len() != n {
                    c.error(&g, "initial, drift, vol rows and rates must have the same positive length");
                }
                let k = sr.vol.first().map_or(0, Vec::len);
                if k == 0 || sr.vol.iter().any(|row| row.len() != k) {
                    c.error(format!("{g}.vol"), "vol rows must have equal positive length");
                }
                if sr.form == SdeForm::Geometric && sr.initial.iter().any(|x| !(*x > 0.0)) {
                    c.error(format!("{g}.initial"), "geometric prices must start positive");
                }
            }
        }
        AnalysisSpec::CreditCheck(x) => {
            need_credit(c, "credit_check");
            need_default(c, "credit_check");
            need_intensity(c, "credit_check");
            need_process_lgd(c, "credit_check");
            if x.pairs.is_empty() {
                c.error(format!("{f}.pairs"), "needs at least one (t, s) pair");
            }
            for (j, [t, u]) in x.pairs.iter().enumerate() {
                if !(t < u) {
                    c.error(format!("{f}.pairs[{j}]"), "needs t < s");
                }
                c.time_in(&format!("{f}.pairs[{j}]"), *u, horizon);
            }
            c.positive(&format!("{f}.window"), x.window);
        }
        AnalysisSpec::Price(x) => {
            need_credit(c, "price");
            need_default(c, "price");
            need_process_lgd(c, "price");
            if !(x.t >= 0.0 && x.s > x.t) {
                c.error(f, "price needs 0 <= t < s");
            }
            c.time_in(&format!("{f}.s"), x.s, horizon);
            if s.measure == Measure::Physical {
                c.error("measure", "corporate bond pricing needs paths under the pricing measure");
            }
        }
        AnalysisSpec::NovikovMc(x) => {
            need_default(c, "novikov_mc");
            if s.lgd.is_none() {
                c.error(f, "novikov_mc needs an lgd");
            }
            k_ok(c, x.k);
        }
        AnalysisSpec::NovikovQuadrature(x) => {
            need_default(c, "novikov_quadrature");
            need_intensity(c, "novikov_quadrature");
            need_density_lgd(c, "novikov_quadrature");
            k_ok(c, x.k);
            if let Some(w) = x.tau_window {
                c.positive(&format!("{f}.tau_window"), w);
            }
            if !(1..=60).contains(&x.halvings) {
                c.error(format!("{f}.halvings"), "must be in [1, 60]");
            }
            if !(x.divergence_growth > 1.0) {
                c.error(format!("{f}.divergence_growth"), "must exceed 1");
            }
        }
        AnalysisSpec::NovikovCross(x) => {
            need_default(c, "novikov_cross");
            need_intensity(c, "novikov_cross");
            need_density_lgd(c, "novikov_cross");
            k_ok(c, x.k);
        }
        AnalysisSpec::Semigroup(x) => {
            c.count(&format!("{f}.pairs"), x.pairs);
            c.count(&format!("{f}.lattice"), x.lattice);
            c.count(&format!("{f}.gauge_paths"), x.gauge_paths);
            c.positive(&format!("{f}.step"), x.step);
            if x.lattice > 10_000 {
                c.error(format!("{f}.lattice"), "at most 10000 points");
            }
        }
        AnalysisSpec::NelsonLaw(x) => {
            let dt = horizon / s.grid.steps.max(1) as f64;
            let i = x.t / dt;
            if !(x.t > 0.0 && x.t < horizon) || (i - i.round()).abs() > 1e-9 * i.max(1.0) {
                c.error(format!("{f}.t"), "must be an interior grid time");
            }
            if x.points.is_empty() || x.points.iter().any(|q| !q.is_finite()) {
                c.error(format!("{f}.points"), "needs finite evaluation points");
            }
        }
        AnalysisSpec::CoxLaw(x) => {
            match &x.intensity {
                Some(d) => {
                    check_default(c, &format!("{f}.intensity"), d, horizon);
                    if d.is_structural() {
                        c.error(format!("{f}.intensity"), "cox_law needs an intensity model");
                    }
                }
                None => {
                    need_default(c, "cox_law");
                    need_intensity(c, "cox_law");
                }
            }
        }
        AnalysisSpec::FirstPassage(x) => {
            match &s.default_model {
                Some(DefaultSpec::Structural { .. }) => {}
                _ => c.error(f, "first_passage needs a structural default_model"),
            }
            c.positive(&format!("{f}.t"), x.t);
            if x.steps.is_empty() {
                c.error(format!("{f}.steps"), "needs at least one refinement");
            }
            for (j, n) in x.steps.iter().enumerate() {
                c.count(&format!("{f}.steps[{j}]"), *n);
            }
        }
        AnalysisSpec::Q2Law(x) => {
            c.positive(&format!("{f}.t"), x.t);
            if x.ks.is_empty() {
                c.error(format!("{f}.ks"), "needs at least one dimension");
            }
            for k in &x.ks {
                k_ok(c, *k);
            }
        }
    }
}
