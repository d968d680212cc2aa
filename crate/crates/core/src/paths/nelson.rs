//! Nelson's forward, backward and mean stochastic derivatives, estimated as
//! conditional expectations of one-step difference quotients.
//!
//! For Markov processes the past/future sigma-algebras can be replaced by the
//! present one, so the conditional expectation is a regression on the state at
//! `t`. Non-Markov ensembles are rejected for present-state conditioning.

use alloc::vec::Vec;

use super::ensemble::PathEnsemble;
use super::regression::{KernelRegression, RegressionEstimate};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NelsonMode {
    /// `D Q_t = lim E[(Q_{t+h} - Q_t)/h | present]`.
    Forward,
    /// `D_* Q_t = lim E[(Q_t - Q_{t-h})/h | present]`.
    Backward,
    /// `(D + D_*) / 2`.
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Conditioning {
    /// Kernel regression on the state at `t` (Markov processes only).
    Present,
    /// The state at `t` is known to be deterministic, so conditioning is
    /// trivial and the estimate is the ensemble mean. Dispersed states are
    /// rejected.
    Analytic,
}

/// A fitted derivative estimator; evaluate it at states with [`Self::at`].
#[derive(Debug, Clone)]
pub struct NelsonEstimator {
    pub t: f64,
    pub mode: NelsonMode,
    regression: KernelRegression,
}

impl NelsonEstimator {
    pub fn at(&self, state: &[f64]) -> Result<RegressionEstimate> {
        self.regression.evaluate(state)
    }

    pub fn bandwidth(&self) -> &[f64] {
        self.regression.bandwidth()
    }
}

/// Fits the Nelson derivative estimator of `ensemble` at grid time `t`.
///
/// The difference-quotient step is one grid step on each side, using the
/// actual step lengths.
pub fn nelson_derivative(
    ensemble: &PathEnsemble,
    t: f64,
    mode: NelsonMode,
    conditioning: Conditioning,
) -> Result<NelsonEstimator> {
    let grid = ensemble.grid();
    let i = grid.require_index(t)?;
    if i == 0 || i + 1 >= grid.len() {
        return Err(Error::domain(alloc::format!(
            "Nelson derivative needs an interior time, got t = {t}"
        )));
    }
    if conditioning == Conditioning::Present && !ensemble.is_markov() {
        return Err(Error::config(
            "present-state conditioning requires a Markov ensemble",
        ));
    }
    let (n, dim) = (ensemble.n_paths(), ensemble.dim());
    let (dt_f, dt_b) = (grid.dt(i), grid.dt(i - 1));
    let mut states = Vec::with_capacity(n * dim);
    let mut responses = Vec::with_capacity(n * dim);
    for p in 0..n {
        states.extend_from_slice(ensemble.state(p, i));
        for c in 0..dim {
            let x = ensemble.value(p, i, c);
            let fwd = (ensemble.value(p, i + 1, c) - x) / dt_f;
            let bwd = (x - ensemble.value(p, i - 1, c)) / dt_b;
            responses.push(match mode {
                NelsonMode::Forward => fwd,
                NelsonMode::Backward => bwd,
                NelsonMode::Mean => 0.5 * (fwd + bwd),
            });
        }
    }
    let regression = match conditioning {
        Conditioning::Present => KernelRegression::new(states, dim, responses, dim)?,
        Conditioning::Analytic => {
            let reg = KernelRegression::new(states, dim, responses, dim);
            match reg {
                Ok(r) if r.is_degenerate() => r,
                _ => {
                    return Err(Error::config(
                        "analytic conditioning requires a deterministic state at t",
                    ))
                }
            }
        }
    };
    Ok(NelsonEstimator {
        t,
        mode,
        regression,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::{simulate_brownian, TimeGrid};

    #[test]
    fn deterministic_square_path() {
        for steps in [10, 100, 1000] {
            let grid = TimeGrid::uniform(2.0, steps).unwrap();
            let h = grid.dt(0);
            let e = PathEnsemble::deterministic(grid, 40, |t| t * t).unwrap();
            for (mode, bias) in [
                (NelsonMode::Forward, h),
                (NelsonMode::Backward, -h),
                (NelsonMode::Mean, 0.0),
            ] {
                for cond in [Conditioning::Present, Conditioning::Analytic] {
                    let est = nelson_derivative(&e, 1.0, mode, cond).unwrap();
                    let v = est.at(&[1.0]).unwrap().value[0];
                    assert!((v - (2.0 + bias)).abs() < 1e-9, "{mode:?} {v}");
                }
            }
        }
    }

    #[test]
    fn brownian_forward_derivative_vanishes() {
        let grid = TimeGrid::new(alloc::vec![0.0, 0.5, 1.0, 1.5]).unwrap();
        let w = simulate_brownian(&grid, 50_000, 1, 21).unwrap();
        let est = nelson_derivative(&w, 1.0, NelsonMode::Forward, Conditioning::Present).unwrap();
        for q in [-1.0, 0.0, 1.0] {
            let r = est.at(&[q]).unwrap();
            assert!(r.value[0].abs() < 3.0 * r.std_error[0] + 0.02, "q={q}: {r:?}");
        }
    }

    #[test]
    fn boundary_time_and_non_markov_rejected() {
        let grid = TimeGrid::uniform(1.0, 4).unwrap();
        let w = simulate_brownian(&grid, 2000, 1, 1).unwrap();
        assert!(matches!(
            nelson_derivative(&w, 0.0, NelsonMode::Mean, Conditioning::Present),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            nelson_derivative(&w, 1.0, NelsonMode::Mean, Conditioning::Present),
            Err(Error::Domain(_))
        ));
        let nm = w.clone().mark_non_markov();
        assert!(matches!(
            nelson_derivative(&nm, 0.5, NelsonMode::Mean, Conditioning::Present),
            Err(Error::Config(_))
        ));
        assert!(nelson_derivative(&w, 0.5, NelsonMode::Mean, Conditioning::Analytic).is_err());
    }
}
