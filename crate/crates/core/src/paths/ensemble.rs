use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{Distribution, StandardNormal};

use super::grid::TimeGrid;
use crate::error::{Error, Result};
use crate::parallel::map_indexed;
use crate::rng::{path_rng, Purpose};

/// Brownian increments retained alongside an ensemble, shape
/// `(n_paths, steps, dim)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Increments {
    pub dim: usize,
    pub data: Vec<f64>,
}

/// `n_paths` sample paths of a `dim`-dimensional process on a shared grid.
///
/// Values are stored row-major as `(path, time index, component)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    grid: TimeGrid,
    n_paths: usize,
    dim: usize,
    values: Vec<f64>,
    increments: Option<Increments>,
    seed: u64,
    markov: bool,
}

impl PathEnsemble {
    pub fn from_values(
        grid: TimeGrid,
        n_paths: usize,
        dim: usize,
        values: Vec<f64>,
        seed: u64,
    ) -> Result<Self> {
        if n_paths == 0 || dim == 0 {
            return Err(Error::config("ensemble needs n_paths >= 1 and dim >= 1"));
        }
        if values.len() != n_paths * grid.len() * dim {
            return Err(Error::config("ensemble value array has the wrong length"));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let per_path = grid.len() * dim;
            return Err(Error::NonFinite {
                path: pos / per_path,
                step: (pos % per_path) / dim,
                what: "ensemble value".into(),
            });
        }
        Ok(PathEnsemble {
            grid,
            n_paths,
            dim,
            values,
            increments: None,
            seed,
            markov: true,
        })
    }

    /// Builds an ensemble by evaluating `f(path, step, out)` for every cell.
    pub fn from_fn<F>(grid: TimeGrid, n_paths: usize, dim: usize, seed: u64, f: F) -> Result<Self>
    where
        F: Fn(usize, usize, &mut [f64]) + Sync + Send,
    {
        let n_t = grid.len();
        let rows = map_indexed(n_paths, |p| {
            let mut row = vec![0.0; n_t * dim];
            for i in 0..n_t {
                f(p, i, &mut row[i * dim..(i + 1) * dim]);
            }
            row
        });
        PathEnsemble::from_values(grid, n_paths, dim, rows.concat(), seed)
    }

    /// The same deterministic path `f(t)` replicated on every path.
    pub fn deterministic<F>(grid: TimeGrid, n_paths: usize, f: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Sync + Send,
    {
        let times = grid.times().to_vec();
        PathEnsemble::from_fn(grid, n_paths, 1, 0, move |_, i, out| out[0] = f(times[i]))
    }

    pub fn constant(grid: TimeGrid, n_paths: usize, value: f64) -> Result<Self> {
        PathEnsemble::deterministic(grid, n_paths, move |_| value)
    }

    pub fn with_increments(mut self, increments: Increments) -> Result<Self> {
        if increments.dim == 0
            || increments.data.len() != self.n_paths * self.grid.steps() * increments.dim
        {
            return Err(Error::config("increment array has the wrong shape"));
        }
        self.increments = Some(increments);
        Ok(self)
    }

    /// Declares that the process is not Markov in its own state, which makes
    /// present-state conditioning unavailable.
    pub fn mark_non_markov(mut self) -> Self {
        self.markov = false;
        self
    }

    pub fn is_markov(&self) -> bool {
        self.markov
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn increments(&self) -> Option<&Increments> {
        self.increments.as_ref()
    }

    pub fn value(&self, path: usize, step: usize, component: usize) -> f64 {
        self.values[(path * self.grid.len() + step) * self.dim + component]
    }

    /// `value` with path-broadcasting: a single-path ensemble serves every
    /// path index.
    pub fn value_broadcast(&self, path: usize, step: usize, component: usize) -> f64 {
        let p = if self.n_paths == 1 { 0 } else { path };
        self.value(p, step, component)
    }

    /// State vector of one path at one grid index.
    pub fn state(&self, path: usize, step: usize) -> &[f64] {
        let start = (path * self.grid.len() + step) * self.dim;
        &self.values[start..start + self.dim]
    }

    /// All values of one path, `(time index, component)` row-major.
    pub fn path(&self, path: usize) -> &[f64] {
        let per_path = self.grid.len() * self.dim;
        &self.values[path * per_path..(path + 1) * per_path]
    }

    /// One component across paths at a grid index.
    pub fn column(&self, step: usize, component: usize) -> Vec<f64> {
        (0..self.n_paths)
            .map(|p| self.value(p, step, component))
            .collect()
    }

    /// Driver increment `dW^k` of `path` over `[t_step, t_{step+1}]`.
    pub fn increment(&self, path: usize, step: usize, k: usize) -> Option<f64> {
        self.increments.as_ref().map(|inc| {
            inc.data[(path * self.grid.steps() + step) * inc.dim + k]
        })
    }

    /// Component-wise map producing a new 1-dimensional ensemble.
    pub fn map_scalar<F>(&self, f: F) -> Result<PathEnsemble>
    where
        F: Fn(usize, usize, &[f64]) -> f64 + Sync + Send,
    {
        PathEnsemble::from_fn(self.grid.clone(), self.n_paths, 1, self.seed, |p, i, out| {
            out[0] = f(p, i, self.state(p, i))
        })
        .map(|e| if self.markov { e } else { e.mark_non_markov() })
    }

    /// Selects one component as a 1-dimensional ensemble.
    pub fn component(&self, component: usize) -> Result<PathEnsemble> {
        if component >= self.dim {
            return Err(Error::config("component index out of range"));
        }
        self.map_scalar(|_, _, x| x[component])
    }

    pub fn same_layout(&self, other: &PathEnsemble) -> bool {
        self.grid == other.grid && self.n_paths == other.n_paths
    }

    pub(crate) fn require_same_layout(&self, other: &PathEnsemble, what: &str) -> Result<()> {
        if self.same_layout(other) {
            Ok(())
        } else {
            Err(Error::config(alloc::format!(
                "{what}: ensembles differ in grid or path count"
            )))
        }
    }
}

/// Draws the Brownian increments of one path into `out`
/// (`steps * k` values), using the path's own stream.
pub fn brownian_increments(grid: &TimeGrid, k: usize, seed: u64, path: usize, out: &mut [f64]) {
    let mut rng = path_rng(seed, Purpose::Brownian, path);
    for i in 0..grid.steps() {
        let sd = libm::sqrt(grid.dt(i));
        for c in 0..k {
            let z: f64 = StandardNormal.sample(&mut rng);
            out[i * k + c] = sd * z;
        }
    }
}

/// Standard `k`-dimensional Brownian motion, `W_0 = 0`, with its increments
/// retained.
pub fn simulate_brownian(grid: &TimeGrid, n_paths: usize, k: usize, seed: u64) -> Result<PathEnsemble> {
    if n_paths == 0 || k == 0 {
        return Err(Error::config("simulate_brownian needs n_paths >= 1 and K >= 1"));
    }
    let steps = grid.steps();
    let n_t = grid.len();
    let rows = map_indexed(n_paths, |p| {
        let mut inc = vec![0.0; steps * k];
        brownian_increments(grid, k, seed, p, &mut inc);
        let mut vals = vec![0.0; n_t * k];
        for i in 0..steps {
            for c in 0..k {
                vals[(i + 1) * k + c] = vals[i * k + c] + inc[i * k + c];
            }
        }
        (vals, inc)
    });
    let mut values = Vec::with_capacity(n_paths * n_t * k);
    let mut incs = Vec::with_capacity(n_paths * steps * k);
    for (v, i) in rows {
        values.extend_from_slice(&v);
        incs.extend_from_slice(&i);
    }
    PathEnsemble::from_values(grid.clone(), n_paths, k, values, seed)?
        .with_increments(Increments { dim: k, data: incs })
}
