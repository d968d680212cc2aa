use alloc::vec::Vec;

use super::ensemble::PathEnsemble;
use crate::error::{Error, Result};
use crate::math::Estimate;

/// Paths required in every conditioning bin.
const MIN_BIN_PATHS: usize = 30;
const MAX_BINS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct BinResidual {
    /// Range of the time-`t` state covered by the bin.
    pub lower: f64,
    pub upper: f64,
    pub residual: Estimate,
}

/// `E[Q_s | Q_t] - Q_t`, estimated per quantile bin of the time-`t` state.
#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleResidual {
    /// Bin with the largest |residual| / std error.
    pub worst: Estimate,
    pub bins: Vec<BinResidual>,
}

/// Martingale residual of component `component` of `process` between grid
/// times `t < s`.
pub fn martingale_residual(
    process: &PathEnsemble,
    component: usize,
    t: f64,
    s: f64,
) -> Result<MartingaleResidual> {
    if !(t < s) {
        return Err(Error::domain("martingale residual needs t < s"));
    }
    let grid = process.grid();
    let (it, is) = (grid.require_index(t)?, grid.require_index(s)?);
    let n = process.n_paths();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|p| {
            let x = process.value(p, it, component);
            (x, process.value(p, is, component) - x)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(core::cmp::Ordering::Equal));
    let degenerate = pairs[0].0 == pairs[n - 1].0;
    let n_bins = if degenerate { 1 } else { (n / (10 * MIN_BIN_PATHS)).clamp(1, MAX_BINS) };
    if n / n_bins < MIN_BIN_PATHS && !(degenerate && n > 1) {
        return Err(Error::estimation(
            "too few paths per conditioning bin",
            (n / n_bins) as f64,
            MIN_BIN_PATHS,
        ));
    }
    let mut bins = Vec::with_capacity(n_bins);
    for b in 0..n_bins {
        let (lo, hi) = (b * n / n_bins, (b + 1) * n / n_bins);
        let diffs: Vec<f64> = pairs[lo..hi].iter().map(|p| p.1).collect();
        bins.push(BinResidual {
            lower: pairs[lo].0,
            upper: pairs[hi - 1].0,
            residual: Estimate::from_samples(&diffs),
        });
    }
    let worst = bins
        .iter()
        .map(|b| b.residual)
        .max_by(|a, b| {
            let (za, zb) = (a.z_score(0.0).abs(), b.z_score(0.0).abs());
            za.partial_cmp(&zb)
                .unwrap_or(core::cmp::Ordering::Equal)
                .then(a.value.abs().partial_cmp(&b.value.abs()).unwrap_or(core::cmp::Ordering::Equal))
        })
        .expect("at least one bin");
    Ok(MartingaleResidual { worst, bins })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::{simulate_brownian, simulate_ito, Form, ItoSpec, TimeGrid};

    #[test]
    fn driftless_geometric_process_is_a_martingale() {
        let grid = TimeGrid::uniform(1.0, 4).unwrap();
        let spec = ItoSpec::scalar(Form::Geometric, 1.0, 0.0, 0.3).unwrap();
        let s = simulate_ito(&spec, &simulate_brownian(&grid, 50_000, 1, 2).unwrap()).unwrap();
        let r = martingale_residual(&s, 0, 0.5, 1.0).unwrap();
        assert_eq!(r.bins.len(), 10);
        // Ten bins: allow the Bonferroni-style 3.5 sigma for the worst one.
        assert!(r.worst.within(0.0, 3.5, 0.0), "{r:?}");
    }

    #[test]
    fn drift_is_detected_at_its_analytic_size() {
        // Oracle: E[S_1] - S_0 = e^{0.05} - 1 for the geometric drift 0.05,
        // cross-checked on a fine grid with another seed.
        let spec = ItoSpec::scalar(Form::Geometric, 1.0, 0.05, 0.2).unwrap();
        let grid = TimeGrid::uniform(1.0, 4).unwrap();
        let s = simulate_ito(&spec, &simulate_brownian(&grid, 100_000, 1, 3).unwrap()).unwrap();
        let r = martingale_residual(&s, 0, 0.0, 1.0).unwrap();
        let exact = libm::exp(0.05) - 1.0;
        assert!(r.worst.within(exact, 3.0, 0.0), "{r:?} vs {exact}");

        let fine = TimeGrid::uniform(1.0, 200).unwrap();
        let f = simulate_ito(&spec, &simulate_brownian(&fine, 20_000, 1, 4).unwrap()).unwrap();
        let rf = martingale_residual(&f, 0, 0.0, 1.0).unwrap();
        assert!(rf.worst.within(exact, 3.0, 0.0));
    }

    #[test]
    fn constant_process_has_zero_residual() {
        let grid = TimeGrid::uniform(1.0, 2).unwrap();
        let c = PathEnsemble::constant(grid, 100, 3.0).unwrap();
        let r = martingale_residual(&c, 0, 0.5, 1.0).unwrap();
        assert_eq!(r.worst, Estimate::exact(0.0));
    }

    #[test]
    fn too_few_paths() {
        let grid = TimeGrid::uniform(1.0, 2).unwrap();
        let w = simulate_brownian(&grid, 10, 1, 1).unwrap();
        assert!(matches!(
            martingale_residual(&w, 0, 0.5, 1.0),
            Err(Error::Estimation { .. })
        ));
    }
}
