use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::paths::{brownian_increments, PathEnsemble, TimeGrid};
use crate::rng::{path_rng, Purpose};

/// Definition of the statistic `Q^2_t(K)` built from a K-dimensional
/// Brownian motion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Q2Form {
    /// `W_t^T W_t / t`, chi-squared with K degrees of freedom.
    #[default]
    ChiSquared,
    /// `sqrt(W_t^T W_t / t)`, kept for comparison.
    Printed,
}

impl Q2Form {
    pub fn apply(self, squared_norm: f64, t: f64) -> f64 {
        match self {
            Q2Form::ChiSquared => squared_norm / t,
            Q2Form::Printed => libm::sqrt(squared_norm / t),
        }
    }
}

/// `Q^2_t(K)` per path from the K-dimensional Brownian ensemble `w`.
pub fn q2_statistic(w: &PathEnsemble, t: f64, form: Q2Form) -> Result<Vec<f64>> {
    if !(t > 0.0) {
        return Err(Error::domain("Q^2 needs t > 0"));
    }
    let i = w.grid().require_index(t)?;
    Ok((0..w.n_paths())
        .map(|p| {
            let ww: f64 = w.state(p, i).iter().map(|x| x * x).sum();
            form.apply(ww, t)
        })
        .collect())
}

/// `W_tau` on one path: the grid path of `simulate_brownian(grid, _, k, seed)`
/// filled in between grid points with an exact Brownian bridge.
pub fn brownian_at(grid: &TimeGrid, k: usize, seed: u64, path: usize, tau: f64, buf: &mut Vec<f64>) -> Vec<f64> {
    buf.resize(grid.steps() * k, 0.0);
    brownian_increments(grid, k, seed, path, buf);
    let mut w = vec![0.0; k];
    let i = match grid.locate(tau) {
        Some(i) => i,
        None => grid.steps() - 1,
    };
    for step in 0..i {
        for c in 0..k {
            w[c] += buf[step * k + c];
        }
    }
    let (t0, dt) = (grid.times()[i], grid.dt(i));
    let u = ((tau - t0) / dt).clamp(0.0, 1.0);
    let sd = libm::sqrt(u * (1.0 - u) * dt);
    let mut rng = path_rng(seed, Purpose::BridgeInterpolation, path);
    for c in 0..k {
        let z: f64 = StandardNormal.sample(&mut rng);
        w[c] += u * buf[i * k + c] + sd * z;
    }
    w
}
