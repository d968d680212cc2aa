use alloc::vec;
use alloc::vec::Vec;

use super::ensemble::PathEnsemble;
use super::grid::TimeGrid;
use crate::error::Result;
use crate::math::Estimate;
use crate::parallel::map_indexed;

/// Cumulative realized covariation `sum (da)(db)^T`, shape
/// `(n_paths, grid points, dim_a * dim_b)`, zero at the first grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct Covariation {
    pub grid: TimeGrid,
    pub n_paths: usize,
    pub dim_a: usize,
    pub dim_b: usize,
    pub values: Vec<f64>,
}

impl Covariation {
    pub fn at(&self, path: usize, step: usize, i: usize, j: usize) -> f64 {
        let width = self.dim_a * self.dim_b;
        self.values[(path * self.grid.len() + step) * width + i * self.dim_b + j]
    }

    /// Covariation increment over `[t_step, t_{step+1}]` divided by the step
    /// length.
    pub fn rate(&self, path: usize, step: usize, i: usize, j: usize) -> f64 {
        (self.at(path, step + 1, i, j) - self.at(path, step, i, j)) / self.grid.dt(step)
    }

    /// Ensemble mean of the covariation accumulated up to `step`.
    pub fn mean_at(&self, step: usize, i: usize, j: usize) -> Estimate {
        let xs: Vec<f64> = (0..self.n_paths).map(|p| self.at(p, step, i, j)).collect();
        Estimate::from_samples(&xs)
    }

    pub fn mean_total(&self, i: usize, j: usize) -> Estimate {
        self.mean_at(self.grid.len() - 1, i, j)
    }
}

pub fn realized_covariation(a: &PathEnsemble, b: &PathEnsemble) -> Result<Covariation> {
    a.require_same_layout(b, "realized_covariation")?;
    let grid = a.grid();
    let (da, db) = (a.dim(), b.dim());
    let width = da * db;
    let rows = map_indexed(a.n_paths(), |p| {
        let mut acc = vec![0.0; grid.len() * width];
        for s in 0..grid.steps() {
            for i in 0..da {
                let dai = a.value(p, s + 1, i) - a.value(p, s, i);
                for j in 0..db {
                    let dbj = b.value(p, s + 1, j) - b.value(p, s, j);
                    let idx = i * db + j;
                    acc[(s + 1) * width + idx] = acc[s * width + idx] + dai * dbj;
                }
            }
        }
        acc
    });
    Ok(Covariation {
        grid: grid.clone(),
        n_paths: a.n_paths(),
        dim_a: da,
        dim_b: db,
        values: rows.concat(),
    })
}
