use alloc::vec::Vec;

use super::portfolio::{check_market, common_paths, PortfolioNominals};
use super::surface::Gauge;
use crate::error::{Error, Result};
use crate::math::Estimate;
use crate::paths::{realized_covariation, PathEnsemble};

/// Per-interval self-financing residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfFinancingReport {
    /// Left end of each grid interval.
    pub times: Vec<f64>,
    /// Ensemble mean residual rate with its standard error.
    pub mean: Vec<Estimate>,
    /// Largest absolute pathwise residual rate.
    pub max_abs: Vec<f64>,
    /// Pathwise residual rates, `(path, interval)` row-major.
    pub pathwise: Vec<f64>,
    pub n_paths: usize,
}

impl SelfFinancingReport {
    /// Interval with the largest absolute pathwise residual.
    pub fn worst_interval(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.max_abs.iter().enumerate() {
            if *v > self.max_abs[best] {
                best = i;
            }
        }
        best
    }
}

/// Residual of the self-financing identity on each grid interval, as a rate:
/// `(dY - x.dD - 1/2 d<x,D>) / dt` with `Y = x.D`, forward increments and the
/// realized covariation of the strategy with the deflators.
///
/// This is the discrete Stratonovich bookkeeping `dY = x o dD`; it reduces to
/// the financing flow `mean(D).dx / dt`, which vanishes for self-financed
/// rebalancing.
pub fn self_financing_residual(gauges: &[Gauge], strategy: &PortfolioNominals) -> Result<SelfFinancingReport> {
    check_market(gauges)?;
    let grid = gauges[0].grid().clone();
    let n_assets = gauges.len();
    if strategy.n_assets() != n_assets || strategy.ensemble().grid() != &grid {
        return Err(Error::config("strategy does not match the market"));
    }
    let n = common_paths(gauges.iter().map(Gauge::n_paths).chain([strategy.n_paths()]))?;
    let d = PathEnsemble::from_fn(grid.clone(), n, n_assets, 0, |p, i, out| {
        for (j, o) in out.iter_mut().enumerate() {
            *o = gauges[j].deflator_at(p, i);
        }
    })?;
    let x = PathEnsemble::from_fn(grid.clone(), n, n_assets, 0, |p, i, out| {
        for (j, o) in out.iter_mut().enumerate() {
            *o = strategy.at(p, i, j);
        }
    })?;
    let cov = realized_covariation(&x, &d)?;
    let steps = grid.steps();
    let mut pathwise = Vec::with_capacity(n * steps);
    for p in 0..n {
        for i in 0..steps {
            let (mut dy, mut xdd, mut qc) = (0.0, 0.0, 0.0);
            for j in 0..n_assets {
                let (x0, x1) = (x.value(p, i, j), x.value(p, i + 1, j));
                let (d0, d1) = (d.value(p, i, j), d.value(p, i + 1, j));
                dy += x1 * d1 - x0 * d0;
                xdd += x0 * (d1 - d0);
                qc += cov.at(p, i + 1, j, j) - cov.at(p, i, j, j);
            }
            pathwise.push((dy - xdd - 0.5 * qc) / grid.dt(i));
        }
    }
    let mut mean = Vec::with_capacity(steps);
    let mut max_abs = Vec::with_capacity(steps);
    for i in 0..steps {
        let col: Vec<f64> = (0..n).map(|p| pathwise[p * steps + i]).collect();
        mean.push(Estimate::from_samples(&col));
        max_abs.push(col.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    }
    Ok(SelfFinancingReport {
        times: grid.times()[..steps].to_vec(),
        mean,
        max_abs,
        pathwise,
        n_paths: n,
    })
}
