use alloc::vec::Vec;

use super::surface::{forward_rates, ForwardSurface, Gauge};
use crate::error::{Error, Result};
use crate::paths::{PathEnsemble, TimeGrid};

/// Nominals `x_j` per asset, valuation date and (optionally) path.
///
/// Stored as an ensemble of dimension `n_assets`; a single path is shared by
/// every path of the market.
#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioNominals {
    x: PathEnsemble,
}

impl PortfolioNominals {
    pub fn new(x: PathEnsemble) -> Self {
        PortfolioNominals { x }
    }

    /// Buy-and-hold nominals.
    pub fn constant(grid: TimeGrid, x: &[f64]) -> Result<Self> {
        let x = x.to_vec();
        PathEnsemble::from_fn(grid, 1, x.len(), 0, move |_, _, out| out.copy_from_slice(&x)).map(Self::new)
    }

    /// Deterministic strategy `x(t)`.
    pub fn from_time_fn<F>(grid: TimeGrid, n_assets: usize, f: F) -> Result<Self>
    where
        F: Fn(f64, &mut [f64]) + Sync + Send,
    {
        let times = grid.times().to_vec();
        PathEnsemble::from_fn(grid, 1, n_assets, 0, move |_, i, out| f(times[i], out)).map(Self::new)
    }

    pub fn n_assets(&self) -> usize {
        self.x.dim()
    }

    pub fn n_paths(&self) -> usize {
        self.x.n_paths()
    }

    pub fn ensemble(&self) -> &PathEnsemble {
        &self.x
    }

    pub fn at(&self, path: usize, i: usize, j: usize) -> f64 {
        self.x.value_broadcast(path, i, j)
    }
}

pub(crate) fn common_paths(counts: impl IntoIterator<Item = usize>) -> Result<usize> {
    let mut n = 1;
    for c in counts {
        if c != 1 {
            if n != 1 && n != c {
                return Err(Error::config("path counts must be 1 or agree"));
            }
            n = c;
        }
    }
    Ok(n)
}

pub(crate) fn check_market(gauges: &[Gauge]) -> Result<()> {
    let first = gauges.first().ok_or_else(|| Error::config("market has no assets"))?;
    for g in &gauges[1..] {
        if g.grid() != first.grid() {
            return Err(Error::config(alloc::format!("asset {} uses a different valuation grid", g.label)));
        }
        let (a, b) = (g.term_structure.step(), first.term_structure.step());
        if (a - b).abs() > 1e-12 * b || g.term_structure.n_maturities() != first.term_structure.n_maturities() {
            return Err(Error::config(alloc::format!("asset {} uses a different maturity lattice", g.label)));
        }
    }
    Ok(())
}

/// Portfolio gauge: `D^x = sum x_j D^j`, `f^x = sum (x_j D^j / D^x) f^j`,
/// `P^x = exp(-int f^x)`.
///
/// The term structure collapses to a single path when it does not vary
/// across paths.
pub fn portfolio_gauge(gauges: &[Gauge], x: &PortfolioNominals) -> Result<Gauge> {
    check_market(gauges)?;
    if x.n_assets() != gauges.len() {
        return Err(Error::config("nominals and market differ in asset count"));
    }
    let grid = gauges[0].grid().clone();
    if x.ensemble().grid() != &grid {
        return Err(Error::config("nominals and market use different grids"));
    }
    let n_paths = common_paths(gauges.iter().map(Gauge::n_paths).chain([x.n_paths()]))?;
    let ts_paths = common_paths(
        gauges
            .iter()
            .map(|g| g.term_structure.n_paths())
            .chain([x.n_paths()])
            .chain(gauges.iter().map(Gauge::n_paths).filter(|_| gauges.len() > 1)),
    )?;
    let n_t = grid.len();
    let mut weights = Vec::with_capacity(n_paths * n_t * gauges.len());
    let mut dx = Vec::with_capacity(n_paths * n_t);
    for p in 0..n_paths {
        for i in 0..n_t {
            let start = weights.len();
            let mut sum = 0.0;
            let mut scale = 0.0;
            for (j, g) in gauges.iter().enumerate() {
                let v = x.at(p, i, j) * g.deflator_at(p, i);
                weights.push(v);
                sum += v;
                scale += v.abs();
            }
            if sum == 0.0 || sum.abs() <= 1e-12 * scale {
                return Err(Error::SingularPortfolio { path: p, step: i });
            }
            for w in &mut weights[start..] {
                *w /= sum;
            }
            dx.push(sum);
        }
    }
    let forwards: Vec<ForwardSurface> = gauges.iter().map(forward_rates).collect::<Result<_>>()?;
    let refs: Vec<&ForwardSurface> = forwards.iter().collect();
    let n_assets = gauges.len();
    let fx = ForwardSurface::combine(&refs, ts_paths, |p, i, j| weights[(p * n_t + i) * n_assets + j]);
    let mut ts = fx.to_term_structure()?;
    if ts_paths > 1 {
        let rows = grid.len() * ts.n_maturities();
        let vals = ts.values();
        if (1..ts_paths).all(|p| vals[p * rows..(p + 1) * rows] == vals[..rows]) {
            ts = super::TermStructureSurface::from_values(grid.clone(), ts.step(), ts.n_maturities(), 1, vals[..rows].to_vec())?;
        }
    }
    let seed = gauges[0].deflator.seed();
    let deflator = PathEnsemble::from_values(grid, n_paths, 1, dx, seed)?;
    Gauge::new("portfolio", deflator, ts)
}

/// Divides every deflator by the numeraire's, so the numeraire deflator
/// becomes identically 1.
pub fn numeraire_change(gauges: &[Gauge], num_index: usize) -> Result<Vec<Gauge>> {
    check_market(gauges)?;
    let num = gauges
        .get(num_index)
        .ok_or_else(|| Error::config("numeraire index out of range"))?;
    let d = &num.deflator;
    for p in 0..d.n_paths() {
        for i in 0..d.grid().len() {
            let v = d.value(p, i, 0);
            if !(v > 0.0) {
                return Err(Error::Numeraire { path: p, step: i });
            }
        }
    }
    let inv = d.map_scalar(|_, _, v| 1.0 / v[0])?;
    let mut out = rescale_deflators(gauges, &inv)?;
    // Exact 1 for the numeraire itself, independent of rounding in 1/D * D.
    let ones = PathEnsemble::constant(d.grid().clone(), d.n_paths(), 1.0)?;
    out[num_index].deflator = ones;
    Ok(out)
}

/// Multiplies every deflator by a common positive factor.
pub fn rescale_deflators(gauges: &[Gauge], factor: &PathEnsemble) -> Result<Vec<Gauge>> {
    check_market(gauges)?;
    if factor.dim() != 1 || factor.grid() != gauges[0].grid() {
        return Err(Error::config("rescaling factor must be scalar on the market grid"));
    }
    gauges
        .iter()
        .map(|g| {
            let n = common_paths([g.n_paths(), factor.n_paths()])?;
            let d = PathEnsemble::from_fn(g.grid().clone(), n, 1, g.deflator.seed(), |p, i, out| {
                out[0] = g.deflator_at(p, i) * factor.value_broadcast(p, i, 0)
            })?;
            Gauge::new(g.label.clone(), d, g.term_structure.clone())
        })
        .collect()
}
