use alloc::vec::Vec;

use super::model::{simulate_default, DefaultModel, DefaultSimulation, LgdProcess};
use crate::curvature::KernelCandidate;
use crate::error::{Error, Result};
use crate::gauges::{check_market, common_paths, forward_rates, ForwardSurface, Gauge};
use crate::math::Estimate;
use crate::parallel::try_map_indexed;
use crate::paths::PathEnsemble;

/// Which measure the simulated paths live under.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasureProxy {
    /// Paths are simulated under the pricing measure, where `beta D` is a
    /// martingale.
    Pricing,
    /// Paths are simulated under a physical measure.
    Physical,
}

/// Government and corporate gauges with a default model, LGD and pricing
/// kernel. The corporate gauge is the pre-default one.
#[derive(Debug, Clone)]
pub struct CreditMarket {
    pub gov: Gauge,
    pub corp: Gauge,
    pub default: DefaultModel,
    pub lgd: LgdProcess,
    pub beta: KernelCandidate,
    pub measure: MeasureProxy,
}

impl CreditMarket {
    pub fn new(
        gov: Gauge,
        corp: Gauge,
        default: DefaultModel,
        lgd: LgdProcess,
        beta: KernelCandidate,
        measure: MeasureProxy,
    ) -> Result<Self> {
        check_market(&[gov.clone(), corp.clone()])?;
        if beta.ensemble().grid() != gov.grid() {
            return Err(Error::config("pricing kernel must share the market grid"));
        }
        common_paths([gov.n_paths(), corp.n_paths(), beta.ensemble().n_paths()])?;
        if let Some(pos) = gov.deflator.values().iter().position(|d| !(*d > 0.0)) {
            let n_t = gov.grid().len();
            return Err(Error::Numeraire {
                path: pos / n_t,
                step: pos % n_t,
            });
        }
        default.validate(gov.grid().horizon())?;
        lgd.validate()?;
        Ok(CreditMarket {
            gov,
            corp,
            default,
            lgd,
            beta,
            measure,
        })
    }

    pub fn n_paths(&self) -> usize {
        common_paths([self.gov.n_paths(), self.corp.n_paths(), self.beta.ensemble().n_paths()]).unwrap_or(1)
    }
}

/// How the corporate deflator at maturity is normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalization {
    /// `D^Corp_s = 1`.
    Terminal,
    /// The market's corporate deflator at `s`.
    Deflator,
}

/// `E*_t[((1 - LGD_tau) 1{tau <= s} + 1{tau > s}) D^Corp_s]` over paths
/// alive at `t`.
pub fn corporate_bond_price(
    market: &CreditMarket,
    t: f64,
    s: f64,
    normalization: Normalization,
    n_paths: usize,
    seed: u64,
) -> Result<Estimate> {
    if market.measure != MeasureProxy::Pricing {
        return Err(Error::config(
            "corporate bond pricing needs paths simulated under the pricing measure",
        ));
    }
    if !(t >= 0.0 && s > t) {
        return Err(Error::config("bond pricing needs 0 <= t < s"));
    }
    let grid = market.gov.grid();
    let is = grid.require_index(s)?;
    let sim = simulate_default(&market.default, grid, n_paths, seed)?;
    let alive = sim.survivors(t);
    if alive.is_empty() {
        return Err(Error::estimation(alloc::format!("every path defaulted by t = {t}"), 0.0, 1));
    }
    let payoffs = try_map_indexed(alive.len(), |k| {
        let p = alive[k];
        let tau = sim.tau[p];
        let recovered = if tau <= s {
            1.0 - market.lgd.sample_at(tau, grid, seed, p)?
        } else {
            1.0
        };
        let d = match normalization {
            Normalization::Terminal => 1.0,
            Normalization::Deflator => market.corp.deflator_at(p, is),
        };
        Ok(recovered * d)
    })?;
    Ok(Estimate::from_samples(&payoffs))
}

/// The credit gauge `D^Cred = D^Corp - D^Gov`, `f^Cred = f^Corp - f^Gov`.
#[derive(Debug, Clone)]
pub struct CreditGauge {
    pub gauge: Gauge,
    pub forward: ForwardSurface,
    pub short_rate: PathEnsemble,
    /// Largest `|P^Cred - P^Corp / P^Gov|` over the surface.
    pub ratio_error: f64,
}

pub fn credit_gauge(market: &CreditMarket) -> Result<CreditGauge> {
    let (gov, corp) = (&market.gov, &market.corp);
    check_market(&[gov.clone(), corp.clone()])?;
    let grid = gov.grid().clone();
    let n = common_paths([gov.n_paths(), corp.n_paths()])?;
    let deflator = PathEnsemble::from_fn(grid.clone(), n, 1, corp.deflator.seed(), |p, i, o| {
        o[0] = corp.deflator_at(p, i) - gov.deflator_at(p, i)
    })?;
    let (fg, fc) = (forward_rates(gov)?, forward_rates(corp)?);
    let ts_paths = common_paths([gov.term_structure.n_paths(), corp.term_structure.n_paths()])?;
    let forward = ForwardSurface::combine(&[&fc, &fg], ts_paths, |_, _, j| if j == 0 { 1.0 } else { -1.0 });
    let ts = forward.to_term_structure()?;
    let n_m = ts.n_maturities();
    let mut ratio_error: f64 = 0.0;
    for p in 0..ts_paths {
        for i in 0..grid.len() {
            for m in 0..n_m {
                let r = corp.term_structure.value(p, i, m) / gov.term_structure.value(p, i, m);
                ratio_error = ratio_error.max((ts.value(p, i, m) - r).abs());
            }
        }
    }
    let rates: Vec<f64> = (0..ts_paths)
        .flat_map(|p| (0..grid.len()).map(move |i| (p, i)))
        .map(|(p, i)| forward.short_rate(p, i))
        .collect();
    let short_rate = PathEnsemble::from_values(grid.clone(), ts_paths, 1, rates, 0)?;
    Ok(CreditGauge {
        gauge: Gauge::new("credit", deflator, ts)?,
        forward,
        short_rate,
        ratio_error,
    })
}

/// Corporate deflator including default: `D^pre` before `tau`, then the
/// recovered value `(1 - LGD_tau) D^pre_tau` held constant.
pub fn defaultable_deflator(pre: &Gauge, sim: &DefaultSimulation, lgd: &LgdProcess) -> Result<PathEnsemble> {
    if pre.grid() != &sim.grid {
        return Err(Error::config("default simulation must share the market grid"));
    }
    let grid = &sim.grid;
    let n = common_paths([pre.n_paths(), sim.n_paths()])?;
    let recovered = try_map_indexed(n, |p| {
        let tau = sim.tau[p.min(sim.n_paths() - 1)];
        if !tau.is_finite() {
            return Ok(None);
        }
        let k = grid.times().partition_point(|x| *x < tau);
        let l = lgd.sample_at(tau, grid, sim.seed, p)?;
        Ok(Some((k, (1.0 - l) * pre.deflator_at(p, k))))
    })?;
    PathEnsemble::from_fn(grid.clone(), n, 1, sim.seed, |p, i, o| {
        o[0] = match recovered[p] {
            Some((k, v)) if i >= k => v,
            _ => pre.deflator_at(p, i),
        }
    })
}

/// Bookkeeping check of `D^Cred_{t+} = (1 - LGD_t X_t) D^Corp_{t-} - D^Gov_t`
/// at every default.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpCheck {
    pub defaults: usize,
    /// Largest deviation from the relation.
    pub max_error: f64,
    /// Mean jump of `D^Cred` divided by `D^Corp_{tau-}`, i.e. `-E[LGD_tau]`
    /// when the government deflator is continuous.
    pub mean_relative_jump: f64,
}

pub fn credit_jump_check(gov: &Gauge, pre: &Gauge, sim: &DefaultSimulation, lgd: &LgdProcess) -> Result<JumpCheck> {
    let dcorp = defaultable_deflator(pre, sim, lgd)?;
    let grid = &sim.grid;
    let (mut defaults, mut max_error, mut jumps) = (0usize, 0.0f64, 0.0);
    for p in 0..dcorp.n_paths() {
        let tau = sim.tau[p.min(sim.n_paths() - 1)];
        if !tau.is_finite() {
            continue;
        }
        let k = grid.times().partition_point(|x| *x < tau);
        let l = lgd.sample_at(tau, grid, sim.seed, p)?;
        let before = pre.deflator_at(p, k);
        let cred_after = dcorp.value(p, k, 0) - gov.deflator_at(p, k);
        let relation = (1.0 - l) * before - gov.deflator_at(p, k);
        max_error = max_error.max((cred_after - relation).abs());
        let cred_before = before - gov.deflator_at(p, k);
        jumps += (cred_after - cred_before) / before;
        defaults += 1;
    }
    Ok(JumpCheck {
        defaults,
        max_error,
        mean_relative_jump: if defaults > 0 { jumps / defaults as f64 } else { 0.0 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::credit::Intensity;
    use crate::gauges::TermStructureSurface;
    use crate::paths::TimeGrid;

    pub(crate) fn flat_gauge(label: &str, grid: &TimeGrid, rate: f64, deflator: f64) -> Gauge {
        let ts = TermStructureSurface::flat(grid.clone(), 0.25, 41, rate).unwrap();
        Gauge::new(label, PathEnsemble::constant(grid.clone(), 1, deflator).unwrap(), ts).unwrap()
    }

    fn market(lambda: f64, lgd: f64, corp_rate: f64) -> CreditMarket {
        let grid = TimeGrid::uniform(10.0, 40).unwrap();
        CreditMarket::new(
            flat_gauge("gov", &grid, 0.0, 1.0),
            flat_gauge("corp", &grid, corp_rate, 1.0),
            DefaultModel::Intensity(Intensity::Constant(lambda)),
            LgdProcess::Constant(lgd),
            KernelCandidate::new(PathEnsemble::constant(grid, 1, 1.0).unwrap()).unwrap(),
            MeasureProxy::Pricing,
        )
        .unwrap()
    }

    #[test]
    fn bond_price_closed_form() {
        let m = market(0.02, 0.4, 0.008);
        let p = corporate_bond_price(&m, 0.0, 5.0, Normalization::Terminal, 100_000, 9).unwrap();
        // E[1 - LGD 1{tau <= 5}] = 1 - 0.4 (1 - e^{-0.1}).
        assert!(p.within(1.0 - 0.4 * (1.0 - libm::exp(-0.1)), 3.0, 0.0), "{p:?}");
        let full = corporate_bond_price(&market(0.02, 0.0, 0.0), 0.0, 5.0, Normalization::Terminal, 1000, 9).unwrap();
        assert_eq!(full.value, 1.0);
        let wiped = corporate_bond_price(&market(1e3, 1.0, 0.0), 0.0, 5.0, Normalization::Terminal, 1000, 9).unwrap();
        assert!(wiped.value < 1e-12);
    }

    #[test]
    fn physical_measure_is_rejected() {
        let mut m = market(0.02, 0.4, 0.0);
        m.measure = MeasureProxy::Physical;
        assert!(corporate_bond_price(&m, 0.0, 5.0, Normalization::Terminal, 10, 1)
            .unwrap_err()
            .is_configuration());
    }

    #[test]
    fn credit_gauge_of_flat_curves() {
        let grid = TimeGrid::uniform(10.0, 40).unwrap();
        let mut m = market(0.02, 0.4, 0.05);
        m.gov = flat_gauge("gov", &grid, 0.03, 1.0);
        let cg = credit_gauge(&m).unwrap();
        assert!(cg.ratio_error <= 1e-12);
        for i in 0..grid.len() {
            assert!((cg.short_rate.value(0, i, 0) - 0.02).abs() < 1e-12);
        }
        let same = credit_gauge(&market(0.02, 0.4, 0.0)).unwrap();
        assert!(same.gauge.deflator.values().iter().all(|d| *d == 0.0));
        assert!(same.gauge.term_structure.values().iter().all(|v| *v == 1.0));
    }

    #[test]
    fn jump_relation_bookkeeping() {
        let grid = TimeGrid::uniform(10.0, 40).unwrap();
        let gov = flat_gauge("gov", &grid, 0.0, 1.0);
        let pre = Gauge::new(
            "corp",
            PathEnsemble::deterministic(grid.clone(), 1, |t| 1.2 * libm::exp(-0.01 * t)).unwrap(),
            TermStructureSurface::flat(grid.clone(), 0.25, 41, 0.01).unwrap(),
        )
        .unwrap();
        let sim = simulate_default(&DefaultModel::Intensity(Intensity::Constant(0.1)), &grid, 500, 4).unwrap();
        let check = credit_jump_check(&gov, &pre, &sim, &LgdProcess::Constant(0.4)).unwrap();
        assert!(check.defaults > 100);
        assert_eq!(check.max_error, 0.0);
        assert!((check.mean_relative_jump + 0.4).abs() < 1e-12);
        // Direct bookkeeping on one defaulted path.
        let d = defaultable_deflator(&pre, &sim, &LgdProcess::Constant(0.4)).unwrap();
        let p = sim.tau.iter().position(|t| t.is_finite() && *t > 1.0).unwrap();
        let k = grid.times().partition_point(|x| *x < sim.tau[p]);
        assert_eq!(d.value(p, k - 1, 0), 1.2 * libm::exp(-0.01 * grid.times()[k - 1]));
        assert!((d.value(p, k, 0) - 0.6 * 1.2 * libm::exp(-0.01 * grid.times()[k])).abs() < 1e-15);
        assert_eq!(d.value(p, grid.steps(), 0), d.value(p, k, 0));
    }
}
