use alloc::vec::Vec;

use super::q2::{brownian_at, Q2Form};
use super::tail::{tail_diagnostics, TailDiagnostics, Verdict};
use crate::credit::{simulate_default, CreditMarket, DefaultModel, LgdProcess};
use crate::error::{Error, Result};
use crate::math::log_sum_exp;
use crate::parallel::try_map_indexed;
use crate::paths::TimeGrid;

/// Loss given default entering the Novikov expectation.
#[derive(Debug, Clone)]
pub enum LgdLaw {
    Process(LgdProcess),
    /// `LGD = min(max, 2a / (2 + a))` with `a = sqrt(cap q / tau)`, which
    /// keeps the exponent at or below `cap`.
    Capped { max: f64, cap: f64 },
}

impl LgdLaw {
    pub fn validate(&self) -> Result<()> {
        match self {
            LgdLaw::Process(p) => p.validate(),
            LgdLaw::Capped { max, cap } => {
                if !(0.0..=1.0).contains(max) || !(*cap >= 0.0) {
                    return Err(Error::config("capped LGD needs max in [0, 1] and cap >= 0"));
                }
                Ok(())
            }
        }
    }
}

/// `(2 l / (2 - l))^2`.
pub fn lgd_factor(l: f64) -> f64 {
    let r = 2.0 * l / (2.0 - l);
    r * r
}

/// Capped LGD for given `tau` and `q`.
pub fn capped_lgd(max: f64, cap: f64, tau: f64, q: f64) -> f64 {
    let a = libm::sqrt(cap * q / tau);
    max.min(2.0 * a / (2.0 + a))
}

#[derive(Debug, Clone)]
pub struct NovikovSettings {
    /// Dimension of the driving Brownian motion.
    pub k: usize,
    pub n_paths: usize,
    pub seed: u64,
    pub form: Q2Form,
    /// Number of running-mean checkpoints in the trace.
    pub trace_points: usize,
}

impl Default for NovikovSettings {
    fn default() -> Self {
        NovikovSettings {
            k: 4,
            n_paths: 100_000,
            seed: 0,
            form: Q2Form::ChiSquared,
            trace_points: 64,
        }
    }
}

/// Monte Carlo estimate of `E[exp((2 L / (2 - L))^2 tau / Q^2_tau)]` over
/// defaults within the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct NovikovEstimate {
    /// Sample mean; infinite when it overflows.
    pub value: f64,
    pub std_error: f64,
    /// Log of the sample mean, finite even when `value` overflows.
    pub log_value: f64,
    pub n_samples: usize,
    /// Fraction of paths without default by the horizon (excluded).
    pub censored_fraction: f64,
    /// Samples dropped because `Q^2 = 0`.
    pub rejected: usize,
    pub tail: TailDiagnostics,
    pub verdict: Verdict,
    /// `(samples used, log running mean)` at geometric checkpoints.
    pub trace: Vec<(usize, f64)>,
}

/// Log-summands `(2 L/(2-L))^2 tau / Q^2` of defaulted paths, in path order;
/// `None` for censored paths and `Some(NaN)` for rejected ones.
fn log_summands(
    model: &DefaultModel,
    lgd: &LgdLaw,
    grid: &TimeGrid,
    settings: &NovikovSettings,
) -> Result<Vec<Option<f64>>> {
    let sim = simulate_default(model, grid, settings.n_paths, settings.seed)?;
    try_map_indexed(settings.n_paths, |p| {
        let tau = sim.tau[p];
        if !tau.is_finite() || tau <= 0.0 {
            return Ok(None);
        }
        let mut buf = Vec::new();
        let w = brownian_at(grid, settings.k, settings.seed, p, tau, &mut buf);
        let ww: f64 = w.iter().map(|x| x * x).sum();
        let q = settings.form.apply(ww, tau);
        if !(q > 0.0) {
            return Ok(Some(f64::NAN));
        }
        let l = match lgd {
            LgdLaw::Process(proc) => proc.sample_at(tau, grid, settings.seed, p)?,
            LgdLaw::Capped { max, cap } => capped_lgd(*max, *cap, tau, q),
        };
        if !(0.0..=1.0).contains(&l) {
            return Err(Error::domain(alloc::format!("LGD {l} outside [0, 1] on path {p}")));
        }
        Ok(Some(lgd_factor(l) * tau / q))
    })
}

pub fn novikov_mc(model: &DefaultModel, lgd: &LgdLaw, grid: &TimeGrid, settings: &NovikovSettings) -> Result<NovikovEstimate> {
    if settings.k == 0 || settings.n_paths == 0 {
        return Err(Error::config("Novikov MC needs K >= 1 and n_paths >= 1"));
    }
    lgd.validate()?;
    let raw = log_summands(model, lgd, grid, settings)?;
    let censored = raw.iter().filter(|r| r.is_none()).count();
    let rejected = raw.iter().filter(|r| matches!(r, Some(x) if x.is_nan())).count();
    let ys: Vec<f64> = raw.into_iter().flatten().filter(|x| !x.is_nan()).collect();
    if ys.is_empty() {
        return Err(Error::estimation("no default within the horizon", 0.0, 1));
    }
    let n = ys.len() as f64;
    let log_value = log_sum_exp(&ys) - libm::log(n);
    let top = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (mut s1, mut s2) = (0.0, 0.0);
    for y in &ys {
        let e = libm::exp(y - top);
        s1 += e;
        s2 += e * e;
    }
    let (m1, m2) = (s1 / n, s2 / n);
    let rel_var = if ys.len() > 1 { (m2 - m1 * m1).max(0.0) / (n - 1.0) } else { 0.0 };
    let std_error = libm::exp(top) * libm::sqrt(rel_var);
    let value = libm::exp(log_value);

    let mut trace = Vec::new();
    let points = settings.trace_points.max(2);
    let ratio = libm::pow(n, 1.0 / (points - 1) as f64);
    let mut next = 1.0f64;
    let mut acc = f64::NEG_INFINITY;
    for (i, y) in ys.iter().enumerate() {
        acc = log_sum_exp(&[acc, *y]);
        let used = i + 1;
        if used as f64 >= next || used == ys.len() {
            trace.push((used, acc - libm::log(used as f64)));
            while next <= used as f64 {
                next = (next * ratio).max(next + 1.0);
            }
        }
    }
    let tail = tail_diagnostics(&ys);
    Ok(NovikovEstimate {
        value,
        std_error,
        log_value,
        n_samples: ys.len(),
        censored_fraction: censored as f64 / settings.n_paths as f64,
        rejected,
        verdict: tail.verdict,
        tail,
        trace,
    })
}

/// [`novikov_mc`] with the market's default model and LGD process.
pub fn novikov_mc_market(market: &CreditMarket, settings: &NovikovSettings) -> Result<NovikovEstimate> {
    novikov_mc(
        &market.default,
        &LgdLaw::Process(market.lgd.clone()),
        market.gov.grid(),
        settings,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::credit::Intensity;
    use proptest::prelude::*;

    fn setup() -> (DefaultModel, TimeGrid) {
        (
            DefaultModel::Intensity(Intensity::Constant(0.05)),
            TimeGrid::uniform(40.0, 80).unwrap(),
        )
    }

    fn settings(n: usize, seed: u64) -> NovikovSettings {
        NovikovSettings { n_paths: n, seed, ..Default::default() }
    }

    #[test]
    fn zero_lgd_is_exactly_one() {
        let (m, g) = setup();
        let e = novikov_mc(&m, &LgdLaw::Process(LgdProcess::Constant(0.0)), &g, &settings(5000, 1)).unwrap();
        assert_eq!(e.value, 1.0);
        assert_eq!(e.std_error, 0.0);
        assert_eq!(e.verdict, Verdict::FiniteEvidence);
        // Censored fraction is the survival to the horizon.
        assert!((e.censored_fraction - libm::exp(-2.0)).abs() < 0.02);
    }

    #[test]
    fn constant_lgd_shows_divergence() {
        let (m, g) = setup();
        let e = novikov_mc(&m, &LgdLaw::Process(LgdProcess::Constant(0.4)), &g, &settings(100_000, 2)).unwrap();
        assert_eq!(e.verdict, Verdict::DivergenceEvidence, "{:?}", e.tail);
        assert!(e.value >= 1.0);
    }

    #[test]
    fn capped_exponent_is_bounded() {
        let (m, g) = setup();
        let e = novikov_mc(&m, &LgdLaw::Capped { max: 0.4, cap: 0.1 }, &g, &settings(20_000, 3)).unwrap();
        assert!(e.value >= 1.0 && e.value <= libm::exp(0.1));
        assert_eq!(e.verdict, Verdict::FiniteEvidence);
        // Capped LGD reproduces the cap exactly when it binds.
        let l = capped_lgd(1.0, 0.1, 2.0, 0.3);
        assert!((lgd_factor(l) * 2.0 / 0.3 - 0.1).abs() < 1e-14);
        assert_eq!(e.trace.last().unwrap().0, e.n_samples);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn larger_lgd_never_lowers_the_estimate(a in 0.0f64..1.0, b in 0.0f64..1.0, seed in 0u64..1000) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let (m, g) = setup();
            let s = settings(500, seed);
            let el = novikov_mc(&m, &LgdLaw::Process(LgdProcess::Constant(lo)), &g, &s).unwrap();
            let eh = novikov_mc(&m, &LgdLaw::Process(LgdProcess::Constant(hi)), &g, &s).unwrap();
            prop_assert!(eh.log_value >= el.log_value);
        }
    }
}
