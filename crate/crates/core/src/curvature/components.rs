use alloc::string::String;
use alloc::vec::Vec;

use super::PROBE_PATHS;
use crate::error::{Error, Result};
use crate::gauges::{forward_rates, Gauge};
use crate::paths::{nelson_derivative, Conditioning, NelsonMode, PathEnsemble};

/// Curvature components per interior grid time.
///
/// Rows of the per-asset tables are times, columns are assets.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureReport {
    pub times: Vec<f64>,
    pub assets: Vec<String>,
    /// `a_j(t) = D log D^j_t + r^j_t`, averaged over probe states.
    pub components: Vec<Vec<f64>>,
    /// Standard error of each component from the Nelson estimator.
    pub std_errors: Vec<Vec<f64>>,
    /// Mean over probe states of `max_j a_j - min_j a_j`.
    pub curvature_norm: Vec<f64>,
    /// Mean over probe states of the deflator-weighted standard deviation of
    /// the `a_j`.
    pub weighted_std: Vec<f64>,
    /// Three standard errors of the spread at each time.
    pub tolerance: Vec<f64>,
    /// Probe states per time at which the estimator had enough data.
    pub probes_used: Vec<usize>,
    /// Optional zero-curvature residual on the same times.
    pub zc_residual: Option<Vec<f64>>,
}

impl CurvatureReport {
    pub fn max_norm(&self) -> f64 {
        self.curvature_norm.iter().cloned().fold(0.0, f64::max)
    }

    /// True when the spread is within tolerance at every time.
    pub fn is_flat(&self, slack: f64) -> bool {
        self.curvature_norm
            .iter()
            .zip(&self.tolerance)
            .all(|(n, tol)| *n <= tol + slack)
    }
}

/// Estimates `a_j(t) = D log D^j_t + r^j_t` with `D log D = D(D)/D`, the mean
/// Nelson derivative conditioned on the joint deflator state, at the states
/// of the first probe paths. Probes whose kernel window is too sparse are
/// skipped; the time fails only when every probe does.
pub fn curvature_components(gauges: &[Gauge]) -> Result<CurvatureReport> {
    let first = gauges.first().ok_or_else(|| Error::config("market has no assets"))?;
    let grid = first.grid().clone();
    let n_assets = gauges.len();
    let n = gauges.iter().map(Gauge::n_paths).max().unwrap_or(1);
    for g in gauges {
        if g.grid() != &grid || (g.n_paths() != 1 && g.n_paths() != n) {
            return Err(Error::config(alloc::format!("asset {} does not share the market layout", g.label)));
        }
    }
    let joint = PathEnsemble::from_fn(grid.clone(), n, n_assets, 0, |p, i, out| {
        for (j, o) in out.iter_mut().enumerate() {
            *o = gauges[j].deflator_at(p, i);
        }
    })?;
    let joint = if gauges.iter().all(|g| g.deflator.is_markov()) {
        joint
    } else {
        joint.mark_non_markov()
    };
    let forwards = gauges.iter().map(forward_rates).collect::<Result<Vec<_>>>()?;
    let probes: Vec<usize> = (0..n.min(PROBE_PATHS)).collect();

    let interior: Vec<usize> = (1..grid.len().saturating_sub(1)).collect();
    if interior.is_empty() {
        return Err(Error::domain("curvature needs at least one interior grid time"));
    }
    let mut report = CurvatureReport {
        times: interior.iter().map(|&i| grid.times()[i]).collect(),
        assets: gauges.iter().map(|g| g.label.clone()).collect(),
        components: Vec::new(),
        std_errors: Vec::new(),
        curvature_norm: Vec::new(),
        weighted_std: Vec::new(),
        tolerance: Vec::new(),
        probes_used: Vec::new(),
        zc_residual: None,
    };
    for &i in &interior {
        let t = grid.times()[i];
        let deterministic = (1..n).all(|p| joint.state(p, i) == joint.state(0, i));
        let conditioning = if deterministic {
            Conditioning::Analytic
        } else {
            Conditioning::Present
        };
        let est = nelson_derivative(&joint, t, NelsonMode::Mean, conditioning)?;
        let mut comp = alloc::vec![0.0; n_assets];
        let mut se = alloc::vec![0.0; n_assets];
        let (mut norm, mut wstd, mut norm_se) = (0.0, 0.0, 0.0);
        let mut used = 0usize;
        let mut last_err = None;
        for &p in &probes {
            let state = joint.state(p, i);
            // Probe states deep in the tails may lack data; skip them.
            let fit = match est.at(state) {
                Ok(f) => f,
                Err(e @ Error::Estimation { .. }) => {
                    last_err = Some(e);
                    continue;
                }
                Err(e) => return Err(e),
            };
            used += 1;
            let mut a = alloc::vec![0.0; n_assets];
            let mut a_se = alloc::vec![0.0; n_assets];
            for j in 0..n_assets {
                let d = state[j];
                if d == 0.0 {
                    return Err(Error::domain(alloc::format!(
                        "deflator of {} vanishes at path {p}, t = {t}",
                        gauges[j].label
                    )));
                }
                a[j] = fit.value[j] / d + forwards[j].short_rate(p, i);
                a_se[j] = fit.std_error[j] / d.abs();
                comp[j] += a[j];
                se[j] += a_se[j];
            }
            let (hi, lo) = extremes(&a);
            norm += a[hi] - a[lo];
            norm_se += libm::sqrt(a_se[hi] * a_se[hi] + a_se[lo] * a_se[lo]);
            let total: f64 = state.iter().map(|d| d.abs()).sum();
            let mean: f64 = a.iter().zip(state).map(|(x, d)| x * d.abs()).sum::<f64>() / total;
            let var: f64 = a.iter().zip(state).map(|(x, d)| d.abs() * (x - mean) * (x - mean)).sum::<f64>() / total;
            wstd += libm::sqrt(var);
        }
        if used == 0 {
            return Err(last_err.unwrap_or_else(|| Error::domain(alloc::format!("no probe state at t = {t}"))));
        }
        let k = used as f64;
        report.probes_used.push(used);
        report.components.push(comp.iter().map(|x| x / k).collect());
        report.std_errors.push(se.iter().map(|x| x / k).collect());
        report.curvature_norm.push(norm / k);
        report.weighted_std.push(wstd / k);
        report.tolerance.push(3.0 * norm_se / k);
    }
    Ok(report)
}

fn extremes(a: &[f64]) -> (usize, usize) {
    let (mut hi, mut lo) = (0, 0);
    for (j, x) in a.iter().enumerate() {
        if *x > a[hi] {
            hi = j;
        }
        if *x < a[lo] {
            lo = j;
        }
    }
    (hi, lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauges::TermStructureSurface;
    use crate::paths::{simulate_brownian, TimeGrid};

    fn flat_ts(grid: &TimeGrid, r: f64) -> TermStructureSurface {
        TermStructureSurface::flat(grid.clone(), 0.1, 4, r).unwrap()
    }

    #[test]
    fn deterministic_exponential_deflators() {
        // Oracle: the central quotient of e^{at} gives sinh(a h) / h.
        let grid = TimeGrid::uniform(1.0, 100).unwrap();
        let h = 0.01;
        let gs: Vec<Gauge> = [0.02, 0.05]
            .iter()
            .map(|&a| {
                let d = PathEnsemble::deterministic(grid.clone(), 1, move |t| libm::exp(a * t)).unwrap();
                Gauge::new("g", d, flat_ts(&grid, 0.0)).unwrap()
            })
            .collect();
        let r = curvature_components(&gs).unwrap();
        for (row, norm) in r.components.iter().zip(&r.curvature_norm) {
            assert!((row[0] - libm::sinh(0.02 * h) / h).abs() < 1e-12);
            assert!((row[1] - libm::sinh(0.05 * h) / h).abs() < 1e-12);
            assert!((norm - 0.03).abs() < 1e-6);
        }
        assert!(r.tolerance.iter().all(|t| *t == 0.0));
    }

    #[test]
    fn short_rate_shifts_components() {
        let grid = TimeGrid::uniform(1.0, 10).unwrap();
        let d = PathEnsemble::constant(grid.clone(), 1, 1.0).unwrap();
        let gs = [
            Gauge::new("a", d.clone(), flat_ts(&grid, 0.01)).unwrap(),
            Gauge::new("b", d, flat_ts(&grid, 0.04)).unwrap(),
        ];
        let r = curvature_components(&gs).unwrap();
        assert!(r.curvature_norm.iter().all(|n| (n - 0.03).abs() < 1e-12));
    }

    #[test]
    fn identical_random_assets_are_flat() {
        let grid = TimeGrid::uniform(1.0, 8).unwrap();
        let w = simulate_brownian(&grid, 2000, 1, 5).unwrap();
        let d = w.map_scalar(|_, _, s| libm::exp(0.3 * s[0])).unwrap();
        let gs = [
            Gauge::new("a", d.clone(), flat_ts(&grid, 0.02)).unwrap(),
            Gauge::new("b", d, flat_ts(&grid, 0.02)).unwrap(),
        ];
        let r = curvature_components(&gs).unwrap();
        assert!(r.max_norm() < 1e-12, "{:?}", r.curvature_norm);
        assert!(r.std_errors.iter().flatten().all(|s| *s > 0.0));
    }

    #[test]
    fn constant_random_deflators_are_flat() {
        let grid = TimeGrid::uniform(1.0, 4).unwrap();
        let d1 = PathEnsemble::from_fn(grid.clone(), 1500, 1, 0, |p, _, o| o[0] = 1.0 + (p % 7) as f64).unwrap();
        let d2 = PathEnsemble::from_fn(grid.clone(), 1500, 1, 0, |p, _, o| o[0] = 2.0 + (p % 11) as f64).unwrap();
        let gs = [
            Gauge::new("a", d1, flat_ts(&grid, 0.0)).unwrap(),
            Gauge::new("b", d2, flat_ts(&grid, 0.0)).unwrap(),
        ];
        let r = curvature_components(&gs).unwrap();
        assert!(r.max_norm() == 0.0);
        assert!(r.is_flat(0.0));
    }
}
