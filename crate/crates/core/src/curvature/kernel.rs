use alloc::string::String;
use alloc::vec::Vec;

use super::PROBE_PATHS;
use crate::error::{Error, Result};
use crate::gauges::Gauge;
use crate::math::Estimate;
use crate::paths::{KernelRegression, PathEnsemble};

/// A candidate pricing kernel `beta_t > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelCandidate {
    beta: PathEnsemble,
}

impl KernelCandidate {
    pub fn new(beta: PathEnsemble) -> Result<Self> {
        if beta.dim() != 1 {
            return Err(Error::config("pricing kernel must be one-dimensional"));
        }
        if let Some(pos) = beta.values().iter().position(|b| !(*b > 0.0)) {
            let n_t = beta.grid().len();
            return Err(Error::domain(alloc::format!(
                "pricing kernel not strictly positive at path {}, step {}",
                pos / n_t,
                pos % n_t
            )));
        }
        Ok(KernelCandidate { beta })
    }

    pub fn ensemble(&self) -> &PathEnsemble {
        &self.beta
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelResidual {
    pub asset: String,
    pub t: f64,
    pub s: f64,
    /// Mean model price `P(t, s)` over the probe paths.
    pub price: f64,
    /// Mean kernel-implied price over the probe paths.
    pub implied: f64,
    /// `P(t, s) - E_t[beta_s D_s] / (beta_t D_t)` averaged over probes.
    pub residual: Estimate,
}

impl KernelResidual {
    pub fn passes(&self, k: f64, slack: f64) -> bool {
        self.residual.within(0.0, k, slack)
    }
}

/// Compares each term structure with the prices implied by `beta`.
///
/// The conditional expectation is a kernel regression of
/// `M_s / M_t` on `M_t`, where `M = beta D`; it reduces to a plain mean when
/// `M_t` is deterministic.
pub fn kernel_check(gauges: &[Gauge], beta: &KernelCandidate, pairs: &[(f64, f64)]) -> Result<Vec<KernelResidual>> {
    let b = beta.ensemble();
    let mut out = Vec::with_capacity(gauges.len() * pairs.len());
    for g in gauges {
        if g.grid() != b.grid() {
            return Err(Error::config(alloc::format!("asset {} and the kernel use different grids", g.label)));
        }
        let n = g.n_paths().max(b.n_paths());
        if (g.n_paths() != 1 && g.n_paths() != n) || (b.n_paths() != 1 && b.n_paths() != n) {
            return Err(Error::config("asset and kernel path counts must be 1 or agree"));
        }
        let m = |p: usize, i: usize| b.value_broadcast(p, i, 0) * g.deflator_at(p, i);
        for &(t, s) in pairs {
            let grid = g.grid();
            let i = grid.require_index(t)?;
            let j = grid.require_index(s)?;
            if j < i {
                return Err(Error::domain(alloc::format!("pair ({t}, {s}) has s < t")));
            }
            let mi = g.term_structure.maturity_index(grid.times()[j] - grid.times()[i])?;
            let states: Vec<f64> = (0..n).map(|p| m(p, i)).collect();
            if let Some(p) = states.iter().position(|x| *x == 0.0) {
                return Err(Error::domain(alloc::format!("beta D vanishes at path {p}, t = {t}")));
            }
            let ratios: Vec<f64> = (0..n).map(|p| m(p, j) / states[p]).collect();
            let reg = KernelRegression::new(states.clone(), 1, ratios, 1)?;
            let probes = n.min(PROBE_PATHS);
            let (mut res, mut price, mut implied, mut var) = (0.0, 0.0, 0.0, 0.0);
            for p in 0..probes {
                let fit = reg.evaluate(&states[p..p + 1])?;
                let pv = g.term_structure.value(p, i, mi);
                price += pv;
                implied += fit.value[0];
                res += pv - fit.value[0];
                var += fit.std_error[0] * fit.std_error[0];
            }
            let k = probes as f64;
            out.push(KernelResidual {
                asset: g.label.clone(),
                t,
                s,
                price: price / k,
                implied: implied / k,
                residual: Estimate {
                    value: res / k,
                    std_error: libm::sqrt(var / k),
                },
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauges::{rescale_deflators, TermStructureSurface};
    use crate::paths::{simulate_brownian, TimeGrid};

    fn grid() -> TimeGrid {
        TimeGrid::uniform(2.0, 4).unwrap()
    }

    #[test]
    fn consistent_deterministic_triple() {
        let r = 0.03;
        let d = PathEnsemble::deterministic(grid(), 1, move |t| libm::exp(r * t)).unwrap();
        let g = Gauge::new("a", d, TermStructureSurface::flat(grid(), 0.5, 5, 0.0).unwrap()).unwrap();
        let beta = KernelCandidate::new(PathEnsemble::deterministic(grid(), 1, move |t| libm::exp(-r * t)).unwrap()).unwrap();
        let out = kernel_check(&[g], &beta, &[(0.0, 1.0), (0.5, 2.0)]).unwrap();
        assert!(out.iter().all(|x| x.residual.value.abs() < 1e-15));
    }

    fn flat_market(n: usize) -> (Gauge, PathEnsemble) {
        // Martingale deflator, flat 2% curve.
        let w = simulate_brownian(&grid(), n, 1, 17).unwrap();
        let times = grid().times().to_vec();
        let d = w.map_scalar(|_, i, s| libm::exp(0.2 * s[0] - 0.02 * times[i])).unwrap();
        let g = Gauge::new("a", d, TermStructureSurface::flat(grid(), 0.5, 5, 0.02).unwrap()).unwrap();
        (g, w)
    }

    #[test]
    fn flat_market_and_wrong_kernel() {
        let (g, _) = flat_market(40_000);
        let good = KernelCandidate::new(PathEnsemble::deterministic(grid(), 1, |t| libm::exp(-0.02 * t)).unwrap()).unwrap();
        let pairs = [(0.0, 1.0), (1.0, 2.0)];
        for r in kernel_check(&[g.clone()], &good, &pairs).unwrap() {
            assert!(r.passes(3.0, 0.0), "{r:?}");
        }
        let wrong = KernelCandidate::new(PathEnsemble::constant(grid(), 1, 1.0).unwrap()).unwrap();
        for r in kernel_check(&[g], &wrong, &pairs).unwrap() {
            assert!((r.residual.value - (libm::exp(-0.02) - 1.0)).abs() < 4.0 * r.residual.std_error);
            assert!(r.residual.z_score(0.0).abs() > 3.0, "{r:?}");
        }
    }

    #[test]
    fn scale_invariance() {
        let (g, w) = flat_market(5_000);
        let z = w.map_scalar(|_, i, s| libm::exp(0.1 * s[0] + 0.01 * i as f64)).unwrap();
        let beta = PathEnsemble::deterministic(grid(), 1, |t| libm::exp(-0.02 * t)).unwrap();
        let beta_z = PathEnsemble::from_fn(grid(), 5_000, 1, 0, |p, i, o| o[0] = beta.value(0, i, 0) / z.value(p, i, 0)).unwrap();
        let scaled = rescale_deflators(&[g.clone()], &z).unwrap();
        let pairs = [(0.5, 1.5), (0.0, 2.0)];
        let a = kernel_check(&[g], &KernelCandidate::new(beta).unwrap(), &pairs).unwrap();
        let b = kernel_check(&scaled, &KernelCandidate::new(beta_z).unwrap(), &pairs).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x.residual.value - y.residual.value).abs() < 1e-12);
        }
    }
}
