use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::math::{ks_pvalue, ks_statistic, Estimate};
use crate::parallel::try_map_indexed;
use crate::paths::{simulate_ito_path, Form, ItoSpec, PathEnsemble, TimeGrid};
use crate::rng::{derive_seed, path_rng, Purpose};

/// Default intensity `lambda_t >= 0`.
#[derive(Debug, Clone)]
pub enum Intensity {
    Constant(f64),
    /// `lambda_t = intercept + slope t`.
    Affine { intercept: f64, slope: f64 },
    /// `rates[k]` on `[breaks[k-1], breaks[k])`, with `breaks` increasing and
    /// positive; `rates` has one more entry than `breaks`.
    PiecewiseConstant { breaks: Vec<f64>, rates: Vec<f64> },
    /// One-dimensional Itô process whose state is the intensity, driven by
    /// its own Brownian motion.
    Stochastic(ItoSpec),
}

impl Intensity {
    pub fn is_deterministic(&self) -> bool {
        !matches!(self, Intensity::Stochastic(_))
    }

    /// `lambda_t` for deterministic intensities.
    pub fn rate(&self, t: f64) -> Option<f64> {
        match self {
            Intensity::Constant(l) => Some(*l),
            Intensity::Affine { intercept, slope } => Some(intercept + slope * t),
            Intensity::PiecewiseConstant { breaks, rates } => {
                Some(rates[breaks.partition_point(|b| *b <= t)])
            }
            Intensity::Stochastic(_) => None,
        }
    }

    /// `Lambda_t = int_0^t lambda` for deterministic intensities.
    pub fn cumulative(&self, t: f64) -> Option<f64> {
        match self {
            Intensity::Constant(l) => Some(l * t),
            Intensity::Affine { intercept, slope } => Some(intercept * t + 0.5 * slope * t * t),
            Intensity::PiecewiseConstant { breaks, rates } => {
                let mut acc = 0.0;
                let mut start = 0.0;
                for (k, r) in rates.iter().enumerate() {
                    let end = breaks.get(k).copied().unwrap_or(f64::INFINITY).min(t);
                    if end > start {
                        acc += r * (end - start);
                    }
                    if end >= t {
                        break;
                    }
                    start = end;
                }
                Some(acc)
            }
            Intensity::Stochastic(_) => None,
        }
    }

    /// `Lambda^{-1}(e)`, or infinity when the hazard never accumulates `e`.
    pub fn inverse_cumulative(&self, e: f64) -> Option<f64> {
        match self {
            Intensity::Constant(l) => Some(if *l > 0.0 { e / l } else { f64::INFINITY }),
            Intensity::Affine { intercept: a, slope: b } => {
                let disc = a * a + 2.0 * b * e;
                if disc < 0.0 {
                    return Some(f64::INFINITY);
                }
                let denom = a + libm::sqrt(disc);
                if denom <= 0.0 {
                    return Some(f64::INFINITY);
                }
                let t = 2.0 * e / denom;
                // With a negative slope the hazard stops at the zero of lambda.
                if *b < 0.0 && t > -a / b {
                    return Some(f64::INFINITY);
                }
                Some(t)
            }
            Intensity::PiecewiseConstant { breaks, rates } => {
                let mut acc = 0.0;
                let mut start = 0.0;
                for (k, r) in rates.iter().enumerate() {
                    let end = breaks.get(k).copied().unwrap_or(f64::INFINITY);
                    let mass = r * (end - start);
                    if acc + mass >= e && *r > 0.0 {
                        return Some(start + (e - acc) / r);
                    }
                    acc += mass;
                    start = end;
                }
                Some(f64::INFINITY)
            }
            Intensity::Stochastic(_) => None,
        }
    }

    pub fn validate(&self, horizon: f64) -> Result<()> {
        match self {
            Intensity::Constant(l) => {
                if !(*l >= 0.0) || !l.is_finite() {
                    return Err(Error::config("intensity must be finite and non-negative"));
                }
            }
            Intensity::Affine { intercept, slope } => {
                if !(intercept.is_finite() && slope.is_finite()) {
                    return Err(Error::config("affine intensity coefficients must be finite"));
                }
                if *intercept < 0.0 || intercept + slope * horizon < 0.0 {
                    return Err(Error::domain(alloc::format!(
                        "affine intensity becomes negative on [0, {horizon}]"
                    )));
                }
            }
            Intensity::PiecewiseConstant { breaks, rates } => {
                if rates.len() != breaks.len() + 1 {
                    return Err(Error::config("piecewise intensity needs one more rate than breaks"));
                }
                let mut last = 0.0;
                for b in breaks {
                    if !(*b > last) {
                        return Err(Error::config("intensity breaks must be positive and increasing"));
                    }
                    last = *b;
                }
                if rates.iter().any(|r| !(*r >= 0.0) || !r.is_finite()) {
                    return Err(Error::config("piecewise rates must be finite and non-negative"));
                }
            }
            Intensity::Stochastic(spec) => {
                spec.validate()?;
                if spec.state_dim != 1 {
                    return Err(Error::config("stochastic intensity must be one-dimensional"));
                }
                if spec.initial_state[0] < 0.0 {
                    return Err(Error::config("initial intensity must be non-negative"));
                }
            }
        }
        Ok(())
    }
}

/// How default is triggered.
#[derive(Debug, Clone)]
pub enum DefaultModel {
    /// Default when the one-dimensional equity process first reaches the
    /// barrier. With `bridge` set, crossings between grid points are detected
    /// with the Brownian-bridge probability
    /// `exp(-2 (x_i - b)(x_{i+1} - b) / (sigma^2 dt))`, in log space for the
    /// geometric form.
    Structural { equity: ItoSpec, barrier: f64, bridge: bool },
    /// Cox construction `tau = Lambda^{-1}(E)`, `E ~ Exp(1)`.
    Intensity(Intensity),
}

impl DefaultModel {
    pub fn validate(&self, horizon: f64) -> Result<()> {
        match self {
            DefaultModel::Structural { equity, barrier, .. } => {
                equity.validate()?;
                if equity.state_dim != 1 {
                    return Err(Error::config("structural equity must be one-dimensional"));
                }
                if !barrier.is_finite() || (equity.form == Form::Geometric && *barrier <= 0.0) {
                    return Err(Error::config("barrier must be finite (and positive for geometric equity)"));
                }
                Ok(())
            }
            DefaultModel::Intensity(i) => i.validate(horizon),
        }
    }

    pub fn intensity(&self) -> Option<&Intensity> {
        match self {
            DefaultModel::Intensity(i) => Some(i),
            DefaultModel::Structural { .. } => None,
        }
    }

    /// Upper bound on the grid-monitoring bias of the default probability.
    ///
    /// The bridge correction is exact for constant-coefficient arithmetic
    /// equity and constant-coefficient geometric equity (a Brownian motion
    /// with drift in log space), and Cox sampling inverts deterministic
    /// hazards exactly. No bound is claimed otherwise.
    pub fn grid_bias_bound(&self) -> Option<f64> {
        match self {
            DefaultModel::Structural { equity, bridge, .. } => {
                (*bridge && equity.coefficients.constant()).then_some(0.0)
            }
            DefaultModel::Intensity(i) => i.is_deterministic().then_some(0.0),
        }
    }
}

/// Loss-given-default specification, sampled at the default time.
#[derive(Clone)]
pub enum LgdProcess {
    Constant(f64),
    /// Deterministic `LGD(t)`.
    TimeFn(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
    /// Independent uniform draw on `[lo, hi]` at default.
    Uniform { lo: f64, hi: f64 },
    /// One-dimensional Itô process clipped to `[0, 1]`, driven by its own
    /// Brownian motion and read at `tau` by linear interpolation.
    Ito(ItoSpec),
}

impl fmt::Debug for LgdProcess {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LgdProcess::Constant(l) => f.debug_tuple("Constant").field(l).finish(),
            LgdProcess::TimeFn(_) => f.write_str("TimeFn(..)"),
            LgdProcess::Uniform { lo, hi } => f.debug_struct("Uniform").field("lo", lo).field("hi", hi).finish(),
            LgdProcess::Ito(s) => f.debug_tuple("Ito").field(s).finish(),
        }
    }
}

impl LgdProcess {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            LgdProcess::Constant(l) => (0.0..=1.0).contains(l),
            LgdProcess::TimeFn(_) => true,
            LgdProcess::Uniform { lo, hi } => 0.0 <= *lo && lo <= hi && *hi <= 1.0,
            LgdProcess::Ito(s) => s.validate().is_ok() && s.state_dim == 1,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config("LGD must take values in [0, 1]"))
        }
    }

    /// Whether the value is known without simulation.
    pub fn is_deterministic(&self) -> bool {
        matches!(self, LgdProcess::Constant(_) | LgdProcess::TimeFn(_))
    }

    /// `LGD_t` for deterministic specifications and `E[LGD]` for the
    /// uniform draw.
    pub fn expected_at(&self, t: f64) -> Option<f64> {
        match self {
            LgdProcess::Constant(l) => Some(*l),
            LgdProcess::TimeFn(f) => Some(f(t).clamp(0.0, 1.0)),
            LgdProcess::Uniform { lo, hi } => Some(0.5 * (lo + hi)),
            LgdProcess::Ito(_) => None,
        }
    }

    /// Observed `LGD_t` on one path (simulating the Itô case on `grid`).
    pub fn observed(&self, t: f64, grid: &TimeGrid, seed: u64, path: usize) -> Result<f64> {
        match self {
            LgdProcess::Ito(spec) => {
                let mut buf = Vec::new();
                let mut values = vec![0.0; grid.len()];
                simulate_ito_path(spec, grid, derive_seed(seed, Purpose::Lgd as u64), path, &mut buf, |i, s| {
                    values[i] = s[0]
                })?;
                Ok(interpolate(grid, &values, t).clamp(0.0, 1.0))
            }
            _ => Ok(self.expected_at(t).unwrap_or(0.0)),
        }
    }

    /// `LGD_tau` on one path.
    pub fn sample_at(&self, tau: f64, grid: &TimeGrid, seed: u64, path: usize) -> Result<f64> {
        match self {
            LgdProcess::Uniform { lo, hi } => {
                let mut rng = path_rng(seed, Purpose::Lgd, path);
                let u: f64 = rng.random();
                Ok(lo + (hi - lo) * u)
            }
            _ => self.observed(tau.min(grid.horizon()), grid, seed, path),
        }
    }
}

pub(crate) fn interpolate(grid: &TimeGrid, values: &[f64], t: f64) -> f64 {
    match grid.locate(t) {
        Some(i) => {
            let w = (t - grid.times()[i]) / grid.dt(i);
            values[i] + w * (values[i + 1] - values[i])
        }
        None if t < 0.0 => values[0],
        None => values[values.len() - 1],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DefaultKind {
    Structural,
    Intensity,
}

/// Simulated default times on a grid. `tau` is infinite when no default
/// occurs by the horizon.
#[derive(Debug, Clone)]
pub struct DefaultSimulation {
    pub grid: TimeGrid,
    pub kind: DefaultKind,
    pub tau: Vec<f64>,
    /// Cox clock `E ~ Exp(1)` per path (intensity models).
    pub exponential: Option<Vec<f64>>,
    /// Intensity paths (stochastic intensity models).
    pub intensity: Option<PathEnsemble>,
    /// Cumulative hazard on the grid (stochastic intensity models).
    pub cumulative: Option<PathEnsemble>,
    /// `Lambda_tau` per path, infinite when censored (intensity models).
    pub hazard_at_default: Option<Vec<f64>>,
    /// `Lambda_T` at the horizon per path (intensity models).
    pub hazard_at_horizon: Option<Vec<f64>>,
    /// Smallest equity value observed strictly before default (structural).
    pub pre_default_min: Option<Vec<f64>>,
    /// Equity at the horizon (structural).
    pub terminal_state: Option<Vec<f64>>,
    pub seed: u64,
}

impl DefaultSimulation {
    pub fn n_paths(&self) -> usize {
        self.tau.len()
    }

    pub fn indicator(&self, path: usize, step: usize) -> f64 {
        if self.tau[path] <= self.grid.times()[step] {
            1.0
        } else {
            0.0
        }
    }

    /// The default indicator `X_t` as an ensemble.
    pub fn indicator_ensemble(&self) -> Result<PathEnsemble> {
        PathEnsemble::from_fn(self.grid.clone(), self.n_paths(), 1, self.seed, |p, i, o| {
            o[0] = self.indicator(p, i)
        })
    }

    /// `P[tau <= t]` with its binomial standard error.
    pub fn default_fraction(&self, t: f64) -> Estimate {
        let xs: Vec<f64> = self.tau.iter().map(|&x| if x <= t { 1.0 } else { 0.0 }).collect();
        Estimate::from_samples(&xs)
    }

    /// Paths alive at `t`.
    pub fn survivors(&self, t: f64) -> Vec<usize> {
        (0..self.n_paths()).filter(|&p| self.tau[p] > t).collect()
    }

    /// `P[tau > s | tau > t]` among paths alive at `t`.
    pub fn conditional_survival(&self, t: f64, s: f64) -> Result<Estimate> {
        let alive = self.survivors(t);
        if alive.is_empty() {
            return Err(Error::estimation(alloc::format!("no path survives to t = {t}"), 0.0, 1));
        }
        let xs: Vec<f64> = alive.iter().map(|&p| if self.tau[p] > s { 1.0 } else { 0.0 }).collect();
        Ok(Estimate::from_samples(&xs))
    }

    /// KS statistic and p-value of `Lambda_tau` against Exp(1), censored at
    /// the smallest horizon hazard across paths.
    pub fn cox_clock_ks(&self) -> Option<(f64, f64)> {
        let at = self.hazard_at_default.as_ref()?;
        let censor = self.hazard_at_horizon.as_ref()?.iter().copied().fold(f64::INFINITY, f64::min);
        let d = ks_statistic(at, |x| 1.0 - libm::exp(-x), censor);
        Some((d, ks_pvalue(d, at.len())))
    }

    /// Occurrence/exposure hazard estimate on `(t, s]` among paths alive at
    /// `t`: defaults divided by time at risk, with a Poisson standard error.
    pub fn occurrence_exposure(&self, t: f64, s: f64) -> Result<Estimate> {
        let alive = self.survivors(t);
        let (mut events, mut exposure) = (0.0, 0.0);
        for &p in &alive {
            let end = self.tau[p].min(s);
            exposure += end - t;
            if self.tau[p] <= s {
                events += 1.0;
            }
        }
        if exposure <= 0.0 {
            return Err(Error::estimation("no exposure in the hazard window", 0.0, 1));
        }
        Ok(Estimate {
            value: events / exposure,
            std_error: libm::sqrt(events) / exposure,
        })
    }
}

/// Discrete first passage of `values` (on `times`) through `barrier`.
pub fn first_passage(times: &[f64], values: &[f64], barrier: f64) -> f64 {
    values
        .iter()
        .position(|v| *v <= barrier)
        .map_or(f64::INFINITY, |i| times[i])
}

/// Simulates default times of `model` on `grid`.
pub fn simulate_default(model: &DefaultModel, grid: &TimeGrid, n_paths: usize, seed: u64) -> Result<DefaultSimulation> {
    if n_paths == 0 {
        return Err(Error::config("n_paths must be positive"));
    }
    model.validate(grid.horizon())?;
    match model {
        DefaultModel::Structural { equity, barrier, bridge } => {
            simulate_structural(equity, *barrier, *bridge, grid, n_paths, seed)
        }
        DefaultModel::Intensity(intensity) => simulate_cox(intensity, grid, n_paths, seed),
    }
}

fn simulate_structural(
    equity: &ItoSpec,
    barrier: f64,
    bridge: bool,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<DefaultSimulation> {
    let times = grid.times();
    let geometric = equity.form == Form::Geometric;
    let log_barrier = if geometric { libm::log(barrier) } else { barrier };
    let rows = try_map_indexed(n_paths, |p| {
        let mut buf = Vec::new();
        let mut vol = alloc::vec![0.0; equity.state_dim * equity.driver_dim];
        let mut u_rng = path_rng(seed, Purpose::BridgeCrossing, p);
        let mut tau = f64::INFINITY;
        let mut min_before = f64::INFINITY;
        let mut prev: Option<(f64, f64)> = None;
        let mut last = f64::NAN;
        simulate_ito_path(equity, grid, seed, p, &mut buf, |i, s| {
            let e = s[0];
            last = e;
            // One uniform per step keeps the stream aligned across paths.
            let u: f64 = if i > 0 { u_rng.random() } else { 1.0 };
            if tau.is_finite() {
                return;
            }
            if e <= barrier {
                tau = times[i];
                return;
            }
            if bridge {
                if let Some((x0, sigma)) = prev {
                    let x1 = if geometric { libm::log(e) } else { e };
                    let dt = grid.dt(i - 1);
                    if sigma > 0.0 {
                        let p_cross = libm::exp(-2.0 * (x0 - log_barrier) * (x1 - log_barrier) / (sigma * sigma * dt));
                        if u < p_cross {
                            tau = times[i];
                            return;
                        }
                    }
                }
                equity.volatility_into(times[i], s, &mut vol);
                let sigma = libm::sqrt(vol.iter().map(|v| v * v).sum());
                prev = Some((if geometric { libm::log(e) } else { e }, sigma));
            }
            min_before = min_before.min(e);
        })?;
        Ok((tau, min_before, last))
    })?;
    Ok(DefaultSimulation {
        grid: grid.clone(),
        kind: DefaultKind::Structural,
        tau: rows.iter().map(|r| r.0).collect(),
        exponential: None,
        intensity: None,
        cumulative: None,
        hazard_at_default: None,
        hazard_at_horizon: None,
        pre_default_min: Some(rows.iter().map(|r| r.1).collect()),
        terminal_state: Some(rows.iter().map(|r| r.2).collect()),
        seed,
    })
}

fn simulate_cox(intensity: &Intensity, grid: &TimeGrid, n_paths: usize, seed: u64) -> Result<DefaultSimulation> {
    let horizon = grid.horizon();
    let clocks: Vec<f64> = (0..n_paths)
        .map(|p| Exp1.sample(&mut path_rng(seed, Purpose::DefaultClock, p)))
        .collect();
    let censor = |t: f64| if t <= horizon { t } else { f64::INFINITY };
    match intensity {
        Intensity::Stochastic(spec) => {
            let times = grid.times();
            let n_t = grid.len();
            let lseed = derive_seed(seed, Purpose::Intensity as u64);
            let rows = try_map_indexed(n_paths, |p| {
                let mut buf = Vec::new();
                let mut lam = vec![0.0; n_t];
                simulate_ito_path(spec, grid, lseed, p, &mut buf, |i, s| lam[i] = s[0])?;
                if let Some(i) = lam.iter().position(|l| *l < 0.0) {
                    return Err(Error::domain(alloc::format!(
                        "intensity negative at path {p}, step {i}"
                    )));
                }
                let mut cum = vec![0.0; n_t];
                for i in 0..n_t - 1 {
                    cum[i + 1] = cum[i] + 0.5 * (lam[i] + lam[i + 1]) * grid.dt(i);
                }
                let e = clocks[p];
                let mut tau = f64::INFINITY;
                for i in 0..n_t - 1 {
                    if cum[i + 1] >= e {
                        let inc = cum[i + 1] - cum[i];
                        tau = times[i] + (e - cum[i]) / inc * grid.dt(i);
                        break;
                    }
                }
                Ok((tau, lam, cum))
            })?;
            let tau: Vec<f64> = rows.iter().map(|r| r.0).collect();
            let at_default = tau.iter().zip(&clocks).map(|(t, e)| if t.is_finite() { *e } else { f64::INFINITY }).collect();
            let at_horizon = rows.iter().map(|r| r.2[n_t - 1]).collect();
            let lam: Vec<f64> = rows.iter().flat_map(|r| r.1.iter().copied()).collect();
            let cum: Vec<f64> = rows.iter().flat_map(|r| r.2.iter().copied()).collect();
            Ok(DefaultSimulation {
                grid: grid.clone(),
                kind: DefaultKind::Intensity,
                tau,
                exponential: Some(clocks),
                intensity: Some(PathEnsemble::from_values(grid.clone(), n_paths, 1, lam, lseed)?),
                cumulative: Some(PathEnsemble::from_values(grid.clone(), n_paths, 1, cum, lseed)?),
                hazard_at_default: Some(at_default),
                hazard_at_horizon: Some(at_horizon),
                pre_default_min: None,
                terminal_state: None,
                seed,
            })
        }
        _ => {
            let tau: Vec<f64> = clocks
                .iter()
                .map(|&e| censor(intensity.inverse_cumulative(e).unwrap_or(f64::INFINITY)))
                .collect();
            let at_default = tau
                .iter()
                .map(|t| if t.is_finite() { intensity.cumulative(*t).unwrap_or(f64::INFINITY) } else { f64::INFINITY })
                .collect();
            let total = intensity.cumulative(horizon).unwrap_or(f64::INFINITY);
            Ok(DefaultSimulation {
                grid: grid.clone(),
                kind: DefaultKind::Intensity,
                tau,
                exponential: Some(clocks),
                intensity: None,
                cumulative: None,
                hazard_at_default: Some(at_default),
                hazard_at_horizon: Some(vec![total; n_paths]),
                pre_default_min: None,
                terminal_state: None,
                seed,
            })
        }
    }
}
