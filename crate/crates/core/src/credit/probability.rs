use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::Estimate;
use crate::paths::{Coefficients, ItoSpec, TimeGrid};

use super::model::{simulate_default, DefaultModel, Intensity};

/// `p(t, s) = P[tau <= s | tau > t]`.
///
/// Exact for deterministic intensities. Stochastic intensities average
/// `exp(-(Lambda_s - Lambda_t))` over paths alive at `t`; structural models
/// count first passages by `s` among paths alive at `t`. The grid must reach
/// `s`.
pub fn default_probability(
    model: &DefaultModel,
    t: f64,
    s: f64,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<Estimate> {
    if !(t >= 0.0 && s > t) {
        return Err(Error::config("default probability needs 0 <= t < s"));
    }
    if s > grid.horizon() * (1.0 + 1e-12) {
        return Err(Error::config("grid does not reach s"));
    }
    if let DefaultModel::Intensity(i) = model {
        if i.is_deterministic() {
            i.validate(s)?;
            let d = i.cumulative(s).unwrap_or(0.0) - i.cumulative(t).unwrap_or(0.0);
            return Ok(Estimate::exact(-libm::expm1(-d)));
        }
    }
    let sim = simulate_default(model, grid, n_paths, seed)?;
    match &sim.cumulative {
        Some(cum) => {
            let alive = sim.survivors(t);
            if alive.is_empty() {
                return Err(Error::estimation(alloc::format!("every path defaulted by t = {t}"), 0.0, 1));
            }
            let vals = |p: usize, x: f64| {
                let col: Vec<f64> = (0..grid.len()).map(|i| cum.value(p, i, 0)).collect();
                super::model::interpolate(grid, &col, x)
            };
            let xs: Vec<f64> = alive.iter().map(|&p| -libm::expm1(-(vals(p, s) - vals(p, t)))).collect();
            Ok(Estimate::from_samples(&xs))
        }
        None => {
            let surv = sim.conditional_survival(t, s)?;
            Ok(Estimate {
                value: 1.0 - surv.value,
                std_error: surv.std_error,
            })
        }
    }
}

/// What the market observes when it assesses default risk at `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Information {
    /// The state is observed continuously.
    Full,
    /// The state is observed only at multiples of `interval`; survival is
    /// always observed.
    Coarse { interval: f64 },
}

/// Settings of the short-horizon default estimators.
#[derive(Debug, Clone)]
pub struct HazardProbe {
    pub t: f64,
    /// Positive horizons `s - t`.
    pub horizons: Vec<f64>,
    pub information: Information,
    /// Simulation step of the structural equity.
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
}

/// Conditional survival `P[tau > t + h | info_t, tau > t]` per horizon.
#[derive(Debug, Clone)]
pub struct SurvivalCurve {
    pub t: f64,
    pub horizons: Vec<f64>,
    pub survival: Vec<Estimate>,
    /// Paths behind each estimate (0 when exact).
    pub conditioning_paths: usize,
    /// Fraction of the population already defaulted at `t`.
    pub defaulted_fraction: f64,
}

struct Shifted {
    inner: Arc<dyn Coefficients>,
    offset: f64,
}

impl Coefficients for Shifted {
    fn drift(&self, t: f64, x: &[f64], out: &mut [f64]) {
        self.inner.drift(t + self.offset, x, out)
    }
    fn volatility(&self, t: f64, x: &[f64], out: &mut [f64]) {
        self.inner.volatility(t + self.offset, x, out)
    }
    fn state_independent(&self) -> bool {
        self.inner.state_independent()
    }
    fn constant(&self) -> bool {
        self.inner.constant()
    }
}

fn restart(spec: &ItoSpec, at: f64, state: f64) -> ItoSpec {
    ItoSpec {
        initial_state: alloc::vec![state],
        coefficients: Arc::new(Shifted {
            inner: spec.coefficients.clone(),
            offset: at,
        }),
        ..spec.clone()
    }
}

/// Grid on `[0, end]` with step about `dt` that contains every point of
/// `marks`.
fn grid_with_marks(end: f64, dt: f64, marks: &[f64]) -> Result<TimeGrid> {
    let steps = libm::ceil(end / dt).max(1.0) as usize;
    let mut times: Vec<f64> = (0..=steps).map(|i| end * i as f64 / steps as f64).collect();
    times.extend(marks.iter().copied().filter(|m| *m > 0.0 && *m < end));
    times.sort_by(|a, b| a.total_cmp(b));
    times.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * end.max(1.0));
    TimeGrid::new(times)
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(|a, b| a.total_cmp(b));
    xs[xs.len() / 2]
}

/// Conditional survival curve of `model` seen at `probe.t`.
///
/// Intensity models use the surviving population (exactly for deterministic
/// hazards). Structural models restart the equity from the median surviving
/// state at the last observation time and condition on survival to `t`.
pub fn survival_curve(model: &DefaultModel, probe: &HazardProbe) -> Result<SurvivalCurve> {
    let t = probe.t;
    if !(t >= 0.0) || probe.horizons.is_empty() || probe.horizons.iter().any(|h| !(*h > 0.0)) {
        return Err(Error::config("hazard probe needs t >= 0 and positive horizons"));
    }
    if !(probe.dt > 0.0) || probe.n_paths == 0 {
        return Err(Error::config("hazard probe needs dt > 0 and n_paths > 0"));
    }
    let h_max = probe.horizons.iter().copied().fold(0.0, f64::max);
    match model {
        DefaultModel::Intensity(Intensity::Stochastic(_)) => {
            let mut marks: Vec<f64> = probe.horizons.iter().map(|h| t + h).collect();
            marks.push(t);
            let grid = grid_with_marks(t + h_max, probe.dt, &marks)?;
            let sim = simulate_default(model, &grid, probe.n_paths, probe.seed)?;
            let alive = sim.survivors(t);
            if alive.len() < 2 {
                return Err(Error::estimation("too few surviving paths", alive.len() as f64, 2));
            }
            let survival = probe
                .horizons
                .iter()
                .map(|h| sim.conditional_survival(t, t + h))
                .collect::<Result<_>>()?;
            Ok(SurvivalCurve {
                t,
                horizons: probe.horizons.clone(),
                survival,
                conditioning_paths: alive.len(),
                defaulted_fraction: 1.0 - alive.len() as f64 / sim.n_paths() as f64,
            })
        }
        DefaultModel::Intensity(i) => {
            i.validate(t + h_max)?;
            let base = i.cumulative(t).unwrap_or(0.0);
            let survival = probe
                .horizons
                .iter()
                .map(|h| Estimate::exact(libm::exp(-(i.cumulative(t + h).unwrap_or(0.0) - base))))
                .collect();
            Ok(SurvivalCurve {
                t,
                horizons: probe.horizons.clone(),
                survival,
                conditioning_paths: 0,
                defaulted_fraction: -libm::expm1(-base),
            })
        }
        DefaultModel::Structural { equity, barrier, bridge } => {
            let t0 = match probe.information {
                Information::Full => t,
                Information::Coarse { interval } => {
                    if !(interval > 0.0) {
                        return Err(Error::config("observation interval must be positive"));
                    }
                    interval * libm::floor(t / interval + 1e-12)
                }
            };
            // State at the last observation: the median surviving value.
            let (x0, defaulted_fraction) = if t0 > 0.0 {
                let grid = grid_with_marks(t0, probe.dt, &[])?;
                let sim = simulate_default(model, &grid, probe.n_paths, probe.seed)?;
                let terminal = sim.terminal_state.as_ref().expect("structural");
                let mut alive: Vec<f64> = sim.survivors(t0).iter().map(|&p| terminal[p]).collect();
                if alive.is_empty() {
                    return Err(Error::estimation(alloc::format!("every path defaulted by t = {t0}"), 0.0, 1));
                }
                let frac = 1.0 - alive.len() as f64 / sim.n_paths() as f64;
                (median(&mut alive), frac)
            } else {
                (equity.initial_state[0], 0.0)
            };
            if x0 <= *barrier {
                return Err(Error::estimation("no surviving state to condition on", 0.0, 1));
            }
            let lag = t - t0;
            let mut marks: Vec<f64> = probe.horizons.iter().map(|h| lag + h).collect();
            marks.push(lag);
            let grid = grid_with_marks(lag + h_max, probe.dt, &marks)?;
            let local = DefaultModel::Structural {
                equity: restart(equity, t0, x0),
                barrier: *barrier,
                bridge: *bridge,
            };
            let sim = simulate_default(&local, &grid, probe.n_paths, crate::rng::derive_seed(probe.seed, 0x7e57))?;
            let alive = sim.survivors(lag);
            if alive.len() < 2 {
                return Err(Error::estimation("too few paths survive to t", alive.len() as f64, 2));
            }
            let survival = probe
                .horizons
                .iter()
                .map(|h| sim.conditional_survival(lag, lag + h))
                .collect::<Result<_>>()?;
            Ok(SurvivalCurve {
                t,
                horizons: probe.horizons.clone(),
                survival,
                conditioning_paths: alive.len(),
                defaulted_fraction,
            })
        }
    }
}

/// Weighted least squares fit `y = a + b h`, returning `a` with its standard
/// error. Exact inputs (zero errors) are fitted unweighted.
fn extrapolate(h: &[f64], y: &[Estimate]) -> Estimate {
    if h.len() == 1 {
        return y[0];
    }
    let exact = y.iter().all(|e| e.std_error == 0.0);
    let w: Vec<f64> = y
        .iter()
        .map(|e| if exact { 1.0 } else { 1.0 / (e.std_error * e.std_error) })
        .collect();
    let (mut sw, mut sh, mut shh, mut sy, mut shy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((hk, yk), wk) in h.iter().zip(y).zip(&w) {
        sw += wk;
        sh += wk * hk;
        shh += wk * hk * hk;
        sy += wk * yk.value;
        shy += wk * hk * yk.value;
    }
    let det = sw * shh - sh * sh;
    if det.abs() <= 1e-300 {
        return Estimate { value: sy / sw, std_error: if exact { 0.0 } else { libm::sqrt(1.0 / sw) } };
    }
    let a = (shh * sy - sh * shy) / det;
    let se = if exact { 0.0 } else { libm::sqrt(shh / det) };
    Estimate { value: a, std_error: se }
}

/// Short-horizon hazard read off a survival curve.
#[derive(Debug, Clone)]
pub struct ImpliedIntensity {
    pub t: f64,
    pub horizons: Vec<f64>,
    /// `-ln S(h) / h` per horizon.
    pub by_horizon: Vec<Estimate>,
    /// Linear extrapolation to `h -> 0`.
    pub extrapolated: Estimate,
    /// The same limit under the literal sign `lim d/ds log(1 - p)`, which
    /// is minus the hazard.
    pub printed_sign: f64,
    /// True when the extrapolated hazard is indistinguishable from 0.
    pub degenerate: bool,
    pub conditioning_paths: usize,
}

/// `lambda_t = -d/ds log P[tau > s | info_t]` at `s = t+`, from finite
/// horizons extrapolated to zero.
///
/// For continuous structural models observed continuously the limit is 0;
/// that degeneracy is reported in `degenerate`, not suppressed.
pub fn implied_intensity(model: &DefaultModel, probe: &HazardProbe) -> Result<ImpliedIntensity> {
    let curve = survival_curve(model, probe)?;
    let n = curve.conditioning_paths.max(1) as f64;
    let mut by_horizon = Vec::with_capacity(curve.horizons.len());
    for (h, s) in curve.horizons.iter().zip(&curve.survival) {
        if !(s.value > 0.0) {
            return Err(Error::estimation(alloc::format!("no path survives horizon {h}"), 0.0, 1));
        }
        let value = -libm::log(s.value) / h;
        let std_error = if curve.conditioning_paths == 0 {
            0.0
        } else {
            // One event out of n bounds the error when none is observed.
            (s.std_error / s.value).max(1.0 / n) / h
        };
        by_horizon.push(Estimate { value, std_error });
    }
    let extrapolated = extrapolate(&curve.horizons, &by_horizon);
    let degenerate = libm::fabs(extrapolated.value) <= 3.0 * extrapolated.std_error + 1e-12;
    Ok(ImpliedIntensity {
        t: curve.t,
        horizons: curve.horizons,
        by_horizon,
        extrapolated,
        printed_sign: -extrapolated.value,
        degenerate,
        conditioning_paths: curve.conditioning_paths,
    })
}

/// Forward derivative of the default indicator,
/// `lim_h E_t[(X_{t+h} - X_t) / h]`.
#[derive(Debug, Clone)]
pub struct NelsonDefaultDerivative {
    pub t: f64,
    /// On paths alive at `t`.
    pub on_survivors: Estimate,
    /// On paths already defaulted, where `X` is constant.
    pub on_defaulted: f64,
    pub defaulted_fraction: f64,
    /// `(1 - defaulted_fraction) * on_survivors`.
    pub population: Estimate,
    pub by_horizon: Vec<Estimate>,
}

pub fn nelson_default_derivative(model: &DefaultModel, probe: &HazardProbe) -> Result<NelsonDefaultDerivative> {
    let curve = match survival_curve(model, probe) {
        Ok(c) => c,
        Err(Error::Estimation { .. }) if everyone_defaulted(model, probe)? => {
            return Ok(NelsonDefaultDerivative {
                t: probe.t,
                on_survivors: Estimate::exact(f64::NAN),
                on_defaulted: 0.0,
                defaulted_fraction: 1.0,
                population: Estimate::exact(0.0),
                by_horizon: Vec::new(),
            });
        }
        Err(e) => return Err(e),
    };
    let n = curve.conditioning_paths.max(1) as f64;
    let by_horizon: Vec<Estimate> = curve
        .horizons
        .iter()
        .zip(&curve.survival)
        .map(|(h, s)| Estimate {
            value: (1.0 - s.value) / h,
            std_error: if curve.conditioning_paths == 0 { 0.0 } else { s.std_error.max(1.0 / n) / h },
        })
        .collect();
    let on_survivors = extrapolate(&curve.horizons, &by_horizon);
    let alive = 1.0 - curve.defaulted_fraction;
    Ok(NelsonDefaultDerivative {
        t: curve.t,
        on_survivors,
        on_defaulted: 0.0,
        defaulted_fraction: curve.defaulted_fraction,
        population: Estimate {
            value: alive * on_survivors.value,
            std_error: alive * on_survivors.std_error,
        },
        by_horizon,
    })
}

fn everyone_defaulted(model: &DefaultModel, probe: &HazardProbe) -> Result<bool> {
    Ok(match model {
        DefaultModel::Structural { equity, barrier, .. } if probe.t == 0.0 => equity.initial_state[0] <= *barrier,
        DefaultModel::Structural { .. } | DefaultModel::Intensity(Intensity::Stochastic(_)) => {
            let grid = grid_with_marks(probe.t.max(probe.dt), probe.dt, &[probe.t])?;
            let sim = simulate_default(model, &grid, probe.n_paths, probe.seed)?;
            sim.survivors(probe.t).is_empty()
        }
        DefaultModel::Intensity(_) => false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::normal_cdf;
    use crate::paths::Form;

    fn probe(t: f64, information: Information, n: usize) -> HazardProbe {
        HazardProbe {
            t,
            horizons: alloc::vec![0.2, 0.1, 0.05, 0.025],
            information,
            dt: 0.0025,
            n_paths: n,
            seed: 5,
        }
    }

    #[test]
    fn deterministic_intensity_probabilities() {
        let grid = TimeGrid::uniform(10.0, 10).unwrap();
        let p = default_probability(&DefaultModel::Intensity(Intensity::Constant(0.02)), 0.0, 5.0, &grid, 1, 0).unwrap();
        assert!((p.value - 0.095_162_581_964_040_4).abs() < 1e-15);
        let affine = DefaultModel::Intensity(Intensity::Affine { intercept: 0.01, slope: 0.002 });
        let p = default_probability(&affine, 0.0, 10.0, &grid, 1, 0).unwrap();
        // Hazard integral 0.1 + 0.1 by direct quadrature of a linear function.
        assert!((p.value - (1.0 - libm::exp(-0.2))).abs() < 1e-15);
    }

    #[test]
    fn unreachable_barrier_gives_zero() {
        let equity = ItoSpec::scalar(Form::Geometric, 1.0, 0.01, 0.0).unwrap();
        let m = DefaultModel::Structural { equity, barrier: 0.5, bridge: true };
        let p = default_probability(&m, 0.0, 2.0, &TimeGrid::uniform(2.0, 20).unwrap(), 100, 1).unwrap();
        assert_eq!(p.value, 0.0);
    }

    #[test]
    fn conditioning_on_empty_set_is_an_error() {
        let equity = ItoSpec::scalar(Form::Geometric, 1.0, 0.0, 0.2).unwrap();
        let m = DefaultModel::Structural { equity, barrier: 2.0, bridge: false };
        let r = default_probability(&m, 0.5, 1.0, &TimeGrid::uniform(1.0, 10).unwrap(), 100, 1);
        assert!(matches!(r, Err(Error::Estimation { .. })));
    }

    #[test]
    fn stochastic_intensity_probability_matches_constant_limit() {
        let spec = ItoSpec::scalar(Form::Geometric, 0.04, 0.0, 1e-9).unwrap();
        let m = DefaultModel::Intensity(Intensity::Stochastic(spec));
        let p = default_probability(&m, 1.0, 3.0, &TimeGrid::uniform(3.0, 30).unwrap(), 2000, 2).unwrap();
        assert!((p.value - (1.0 - libm::exp(-0.08))).abs() < 1e-6, "{p:?}");
    }

    #[test]
    fn intensity_model_through_hazard_estimator() {
        let m = DefaultModel::Intensity(Intensity::Constant(0.05));
        let li = implied_intensity(&m, &probe(1.0, Information::Full, 1)).unwrap();
        assert!((li.extrapolated.value - 0.05).abs() < 1e-12);
        assert!((li.printed_sign + 0.05).abs() < 1e-12);
        assert!(!li.degenerate);
        let nd = nelson_default_derivative(&DefaultModel::Intensity(Intensity::Constant(0.03)), &probe(0.0, Information::Full, 1)).unwrap();
        assert!((nd.on_survivors.value - 0.03).abs() < 1e-6, "{nd:?}");
    }

    #[test]
    fn stochastic_intensity_derivative_is_lambda() {
        let spec = ItoSpec::scalar(Form::Geometric, 0.3, 0.0, 0.05).unwrap();
        let m = DefaultModel::Intensity(Intensity::Stochastic(spec));
        let nd = nelson_default_derivative(&m, &HazardProbe { dt: 0.01, ..probe(0.0, Information::Full, 200_000) }).unwrap();
        assert!(nd.on_survivors.within(0.3, 3.0, 0.0), "{nd:?}");
    }

    #[test]
    fn structural_full_information_is_degenerate() {
        let equity = ItoSpec::scalar(Form::Geometric, 10.0, 0.0, 0.05).unwrap();
        let m = DefaultModel::Structural { equity, barrier: 1.0, bridge: true };
        let li = implied_intensity(&m, &probe(0.5, Information::Full, 20_000)).unwrap();
        assert_eq!(li.extrapolated.value, 0.0);
        assert!(li.degenerate);
        let nd = nelson_default_derivative(&m, &probe(0.5, Information::Full, 20_000)).unwrap();
        assert_eq!(nd.on_survivors.value, 0.0);
    }

    fn abm_survival(d: f64, sigma: f64, u: f64) -> f64 {
        2.0 * normal_cdf(d / (sigma * libm::sqrt(u))) - 1.0
    }

    #[test]
    fn structural_hazard_decays_faster_than_any_power() {
        // Arithmetic equity at distance 0.5 with unit volatility: the
        // finite-horizon hazard follows the first-passage law exactly.
        let equity = ItoSpec::scalar(Form::Arithmetic, 0.5, 0.0, 1.0).unwrap();
        let m = DefaultModel::Structural { equity, barrier: 0.0, bridge: true };
        let li = implied_intensity(&m, &probe(0.0, Information::Full, 200_000)).unwrap();
        for (h, e) in li.horizons.iter().zip(&li.by_horizon) {
            let oracle = -libm::log(abm_survival(0.5, 1.0, *h)) / h;
            assert!(e.within(oracle, 3.0, 1e-9), "h={h} {e:?} vs {oracle}");
        }
        // The oracle hazard h^n * lambda(h) -> 0 for every n.
        let l = |h: f64| -libm::log(abm_survival(0.5, 1.0, h)) / h;
        assert!(l(0.01) / l(0.02) < 0.01 && l(0.02) / l(0.04) < 0.1);
        let v: Vec<f64> = li.by_horizon.iter().map(|e| e.value).collect();
        assert!(v.windows(2).all(|w| w[1] < w[0]) && v[3] < 0.1 * v[0]);
    }

    #[test]
    fn coarse_information_gives_positive_hazard() {
        // State seen at 0, survival seen continuously; hazard at t = 0.5.
        let (d, sigma, t) = (1.0, 1.0, 0.5);
        let equity = ItoSpec::scalar(Form::Arithmetic, d, 0.0, sigma).unwrap();
        let m = DefaultModel::Structural { equity, barrier: 0.0, bridge: true };
        let li = implied_intensity(&m, &probe(t, Information::Coarse { interval: 1.0 }, 200_000)).unwrap();
        let s_t = abm_survival(d, sigma, t);
        for (h, e) in li.horizons.iter().zip(&li.by_horizon) {
            let oracle = -libm::log(abm_survival(d, sigma, t + h) / s_t) / h;
            assert!(e.within(oracle, 3.0, 0.0), "h={h} {e:?} vs {oracle}");
        }
        let density = d / (sigma * libm::sqrt(2.0 * core::f64::consts::PI * t * t * t)) * libm::exp(-d * d / (2.0 * sigma * sigma * t));
        let hazard = density / s_t;
        assert!(li.extrapolated.value > 0.0 && !li.degenerate);
        assert!(li.extrapolated.within(hazard, 3.0, 0.02), "{:?} vs {hazard}", li.extrapolated);
    }

    #[test]
    fn defaulted_set_has_zero_derivative() {
        let equity = ItoSpec::scalar(Form::Geometric, 1.0, 0.0, 0.2).unwrap();
        let m = DefaultModel::Structural { equity, barrier: 2.0, bridge: false };
        let nd = nelson_default_derivative(&m, &probe(0.5, Information::Full, 100)).unwrap();
        assert_eq!(nd.defaulted_fraction, 1.0);
        assert_eq!(nd.on_defaulted, 0.0);
        assert_eq!(nd.population.value, 0.0);
    }
}
