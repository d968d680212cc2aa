use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use super::ensemble::{brownian_increments, Increments, PathEnsemble};
use super::grid::TimeGrid;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::parallel::try_map_indexed;

/// How the coefficients act on the state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Form {
    /// `dS = S (alpha dt + sigma dW)`, simulated with log-Euler.
    Geometric,
    /// `dX = alpha dt + sigma dW`, simulated with Euler–Maruyama.
    Arithmetic,
}

/// Drift and volatility coefficients of an Itô process.
pub trait Coefficients: Send + Sync {
    /// Writes the N-vector drift at `(t, x)` into `out`.
    fn drift(&self, t: f64, x: &[f64], out: &mut [f64]);
    /// Writes the N x K volatility (row-major) at `(t, x)` into `out`.
    fn volatility(&self, t: f64, x: &[f64], out: &mut [f64]);
    /// True when neither coefficient depends on the state.
    fn state_independent(&self) -> bool {
        false
    }
    /// True when the coefficients depend on neither time nor state.
    fn constant(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone)]
pub struct ConstantCoefficients {
    pub drift: Vec<f64>,
    pub volatility: Matrix,
}

impl Coefficients for ConstantCoefficients {
    fn drift(&self, _t: f64, _x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.drift);
    }
    fn volatility(&self, _t: f64, _x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.volatility.data);
    }
    fn state_independent(&self) -> bool {
        true
    }
    fn constant(&self) -> bool {
        true
    }
}

/// Coefficients given by closures.
pub struct FnCoefficients<A, S> {
    pub drift: A,
    pub volatility: S,
    pub state_independent: bool,
}

impl<A, S> Coefficients for FnCoefficients<A, S>
where
    A: Fn(f64, &[f64], &mut [f64]) + Send + Sync,
    S: Fn(f64, &[f64], &mut [f64]) + Send + Sync,
{
    fn drift(&self, t: f64, x: &[f64], out: &mut [f64]) {
        (self.drift)(t, x, out)
    }
    fn volatility(&self, t: f64, x: &[f64], out: &mut [f64]) {
        (self.volatility)(t, x, out)
    }
    fn state_independent(&self) -> bool {
        self.state_independent
    }
}

/// An N-dimensional Itô process driven by a K-dimensional Brownian motion.
#[derive(Clone)]
pub struct ItoSpec {
    pub state_dim: usize,
    pub driver_dim: usize,
    pub form: Form,
    pub initial_state: Vec<f64>,
    pub coefficients: Arc<dyn Coefficients>,
}

impl fmt::Debug for ItoSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ItoSpec")
            .field("state_dim", &self.state_dim)
            .field("driver_dim", &self.driver_dim)
            .field("form", &self.form)
            .field("initial_state", &self.initial_state)
            .finish_non_exhaustive()
    }
}

impl ItoSpec {
    pub fn new(
        form: Form,
        initial_state: Vec<f64>,
        driver_dim: usize,
        coefficients: Arc<dyn Coefficients>,
    ) -> Result<Self> {
        let spec = ItoSpec {
            state_dim: initial_state.len(),
            driver_dim,
            form,
            initial_state,
            coefficients,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Constant drift vector and N x K volatility matrix.
    pub fn constant(form: Form, initial_state: Vec<f64>, drift: Vec<f64>, volatility: Matrix) -> Result<Self> {
        if drift.len() != initial_state.len() || volatility.rows != initial_state.len() {
            return Err(Error::config("drift/volatility dimensions do not match the state"));
        }
        let k = volatility.cols;
        ItoSpec::new(
            form,
            initial_state,
            k,
            Arc::new(ConstantCoefficients { drift, volatility }),
        )
    }

    /// One-dimensional constant-coefficient process.
    pub fn scalar(form: Form, initial: f64, drift: f64, vol: f64) -> Result<Self> {
        ItoSpec::constant(form, vec![initial], vec![drift], Matrix::from_rows(1, 1, vec![vol]))
    }

    pub fn validate(&self) -> Result<()> {
        if self.state_dim == 0 || self.driver_dim == 0 {
            return Err(Error::config("Itô process needs N >= 1 and K >= 1"));
        }
        if self.initial_state.iter().any(|x| !x.is_finite()) {
            return Err(Error::config("initial state must be finite"));
        }
        if self.form == Form::Geometric && self.initial_state.iter().any(|&x| x <= 0.0) {
            return Err(Error::config("geometric form requires a strictly positive initial state"));
        }
        Ok(())
    }

    pub fn drift_at(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.state_dim];
        self.coefficients.drift(t, x, &mut out);
        out
    }

    pub fn volatility_at(&self, t: f64, x: &[f64]) -> Matrix {
        let mut m = Matrix::zeros(self.state_dim, self.driver_dim);
        self.coefficients.volatility(t, x, &mut m.data);
        m
    }

    /// Row-major `N x K` volatility into `out`, without allocating.
    pub fn volatility_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        self.coefficients.volatility(t, x, out);
    }

    /// Advances `state` over one step with driver increment `dw`.
    ///
    /// `scratch` must hold `N + N*K` values.
    fn step(
        &self,
        t: f64,
        dt: f64,
        dw: &[f64],
        state: &mut [f64],
        scratch: &mut [f64],
        path: usize,
        step: usize,
    ) -> Result<()> {
        let (n, k) = (self.state_dim, self.driver_dim);
        let (drift, vol) = scratch.split_at_mut(n);
        self.coefficients.drift(t, state, drift);
        self.coefficients.volatility(t, state, vol);
        if drift.iter().chain(vol.iter()).any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                path,
                step,
                what: "Itô coefficient".into(),
            });
        }
        for j in 0..n {
            let row = &vol[j * k..(j + 1) * k];
            let shock: f64 = row.iter().zip(dw).map(|(s, w)| s * w).sum();
            match self.form {
                Form::Geometric => {
                    let var: f64 = row.iter().map(|s| s * s).sum();
                    state[j] *= libm::exp((drift[j] - 0.5 * var) * dt + shock);
                }
                Form::Arithmetic => state[j] += drift[j] * dt + shock,
            }
            if !state[j].is_finite() {
                return Err(Error::NonFinite {
                    path,
                    step: step + 1,
                    what: "simulated state".into(),
                });
            }
        }
        Ok(())
    }
}

fn simulate_from_increments(
    spec: &ItoSpec,
    grid: &TimeGrid,
    increments: &[f64],
    path: usize,
    mut visit: impl FnMut(usize, &[f64]),
) -> Result<()> {
    let k = spec.driver_dim;
    let mut state = spec.initial_state.clone();
    let mut scratch = vec![0.0; spec.state_dim * (1 + k)];
    visit(0, &state);
    for i in 0..grid.steps() {
        spec.step(
            grid.times()[i],
            grid.dt(i),
            &increments[i * k..(i + 1) * k],
            &mut state,
            &mut scratch,
            path,
            i,
        )?;
        visit(i + 1, &state);
    }
    Ok(())
}

/// Simulates one path of `spec` without materializing an ensemble, drawing
/// the same Brownian increments `simulate_brownian(grid, _, K, seed)` would
/// assign to `path`. `visit(step, state)` sees every grid state.
pub fn simulate_ito_path(
    spec: &ItoSpec,
    grid: &TimeGrid,
    seed: u64,
    path: usize,
    increments: &mut Vec<f64>,
    visit: impl FnMut(usize, &[f64]),
) -> Result<()> {
    increments.resize(grid.steps() * spec.driver_dim, 0.0);
    brownian_increments(grid, spec.driver_dim, seed, path, increments);
    simulate_from_increments(spec, grid, increments, path, visit)
}

/// Simulates `spec` on the driver's grid using the driver's increments.
/// The result keeps a copy of the increments.
pub fn simulate_ito(spec: &ItoSpec, driver: &PathEnsemble) -> Result<PathEnsemble> {
    spec.validate()?;
    let inc = driver
        .increments()
        .ok_or_else(|| Error::config("driver ensemble carries no Brownian increments"))?;
    if inc.dim != spec.driver_dim {
        return Err(Error::config(alloc::format!(
            "driver dimension {} does not match K = {}",
            inc.dim,
            spec.driver_dim
        )));
    }
    let grid = driver.grid();
    let n = spec.state_dim;
    let per_path_inc = grid.steps() * inc.dim;
    let rows = try_map_indexed(driver.n_paths(), |p| {
        let mut vals = vec![0.0; grid.len() * n];
        simulate_from_increments(
            spec,
            grid,
            &inc.data[p * per_path_inc..(p + 1) * per_path_inc],
            p,
            |i, s| vals[i * n..(i + 1) * n].copy_from_slice(s),
        )?;
        Ok(vals)
    })?;
    PathEnsemble::from_values(grid.clone(), driver.n_paths(), n, rows.concat(), driver.seed())?
        .with_increments(Increments {
            dim: inc.dim,
            data: inc.data.clone(),
        })
}
