use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::parallel::map_indexed;
use crate::paths::{PathEnsemble, TimeGrid};

/// Term structure `P(t, t + m * step)` for every valuation date `t` of the
/// grid and maturity offsets `m = 0..n_maturities`.
///
/// A surface with a single path is deterministic and serves every path.
#[derive(Debug, Clone, PartialEq)]
pub struct TermStructureSurface {
    grid: TimeGrid,
    step: f64,
    n_maturities: usize,
    n_paths: usize,
    values: Vec<f64>,
}

impl TermStructureSurface {
    /// Values are `(path, valuation index, maturity index)` row-major.
    pub fn from_values(
        grid: TimeGrid,
        step: f64,
        n_maturities: usize,
        n_paths: usize,
        mut values: Vec<f64>,
    ) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::config("maturity step must be positive"));
        }
        if n_maturities == 0 || n_paths == 0 {
            return Err(Error::config("term structure needs at least one maturity and one path"));
        }
        if values.len() != n_paths * grid.len() * n_maturities {
            return Err(Error::config("term structure array has the wrong length"));
        }
        for (row, chunk) in values.chunks_mut(n_maturities).enumerate() {
            let (path, step_idx) = (row / grid.len(), row % grid.len());
            if (chunk[0] - 1.0).abs() > 1e-12 {
                return Err(Error::domain(alloc::format!(
                    "P(t,t) = {} != 1 at path {path}, step {step_idx}",
                    chunk[0]
                )));
            }
            chunk[0] = 1.0;
            if let Some(m) = chunk.iter().position(|p| !(*p > 0.0) || !p.is_finite()) {
                return Err(Error::domain(alloc::format!(
                    "term structure not strictly positive at path {path}, step {step_idx}, maturity {m}"
                )));
            }
        }
        Ok(TermStructureSurface {
            grid,
            step,
            n_maturities,
            n_paths,
            values,
        })
    }

    /// Builds a surface from `f(path, t, tau)` with `tau = s - t`.
    pub fn from_fn<F>(grid: TimeGrid, step: f64, n_maturities: usize, n_paths: usize, f: F) -> Result<Self>
    where
        F: Fn(usize, f64, f64) -> f64 + Sync + Send,
    {
        let times = grid.times().to_vec();
        let rows = map_indexed(n_paths, |p| {
            let mut row = Vec::with_capacity(times.len() * n_maturities);
            for &t in &times {
                for m in 0..n_maturities {
                    row.push(f(p, t, m as f64 * step));
                }
            }
            row
        });
        TermStructureSurface::from_values(grid, step, n_maturities, n_paths, rows.concat())
    }

    /// Deterministic flat curve `P(t, s) = exp(-rate (s - t))`.
    pub fn flat(grid: TimeGrid, step: f64, n_maturities: usize, rate: f64) -> Result<Self> {
        TermStructureSurface::from_fn(grid, step, n_maturities, 1, move |_, _, tau| {
            libm::exp(-rate * tau)
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }
    pub fn step(&self) -> f64 {
        self.step
    }
    pub fn n_maturities(&self) -> usize {
        self.n_maturities
    }
    pub fn n_paths(&self) -> usize {
        self.n_paths
    }
    pub fn is_deterministic(&self) -> bool {
        self.n_paths == 1
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `P(t_i, t_i + m * step)` on `path` (broadcast when deterministic).
    pub fn value(&self, path: usize, i: usize, m: usize) -> f64 {
        let p = if self.n_paths == 1 { 0 } else { path };
        self.values[(p * self.grid.len() + i) * self.n_maturities + m]
    }

    /// The maturity row at one valuation date.
    pub fn row(&self, path: usize, i: usize) -> &[f64] {
        let p = if self.n_paths == 1 { 0 } else { path };
        let start = (p * self.grid.len() + i) * self.n_maturities;
        &self.values[start..start + self.n_maturities]
    }

    /// `P(t, s)` for grid times `t <= s` whose gap lies on the maturity lattice.
    pub fn at(&self, path: usize, t: f64, s: f64) -> Result<f64> {
        let i = self.grid.require_index(t)?;
        let m = self.maturity_index(s - t)?;
        Ok(self.value(path, i, m))
    }

    pub fn maturity_index(&self, tau: f64) -> Result<usize> {
        let k = tau / self.step;
        let m = libm::round(k);
        if tau < 0.0 || (k - m).abs() > 1e-9 * k.abs().max(1.0) || m as usize >= self.n_maturities {
            return Err(Error::domain(alloc::format!(
                "maturity offset {tau} is not on the lattice of {} x {}",
                self.n_maturities,
                self.step
            )));
        }
        Ok(m as usize)
    }
}

/// Instantaneous forward rates of a term structure.
///
/// `interval` holds the staggered rates `-(ln P_{m+1} - ln P_m) / step`;
/// `node` holds central differences at lattice nodes (one-sided at the ends),
/// i.e. averages of adjacent interval rates.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardSurface {
    pub grid: TimeGrid,
    pub step: f64,
    pub n_maturities: usize,
    pub n_paths: usize,
    pub node: Vec<f64>,
    pub interval: Vec<f64>,
}

impl ForwardSurface {
    fn from_interval(grid: TimeGrid, step: f64, n_maturities: usize, n_paths: usize, interval: Vec<f64>) -> Self {
        let w = n_maturities - 1;
        let rows = n_paths * grid.len();
        let mut node = vec![0.0; rows * n_maturities];
        for r in 0..rows {
            let iv = &interval[r * w..(r + 1) * w];
            let nd = &mut node[r * n_maturities..(r + 1) * n_maturities];
            nd[0] = iv[0];
            nd[n_maturities - 1] = iv[w - 1];
            for m in 1..n_maturities - 1 {
                nd[m] = 0.5 * (iv[m - 1] + iv[m]);
            }
        }
        ForwardSurface {
            grid,
            step,
            n_maturities,
            n_paths,
            node,
            interval,
        }
    }

    fn row_index(&self, path: usize, i: usize) -> usize {
        let p = if self.n_paths == 1 { 0 } else { path };
        p * self.grid.len() + i
    }

    /// `f(t_i, t_i + m * step)`.
    pub fn at_node(&self, path: usize, i: usize, m: usize) -> f64 {
        self.node[self.row_index(path, i) * self.n_maturities + m]
    }

    /// Rate on the interval `[m, m+1] * step`.
    pub fn on_interval(&self, path: usize, i: usize, m: usize) -> f64 {
        self.interval[self.row_index(path, i) * (self.n_maturities - 1) + m]
    }

    /// `r_t = f(t, t+)`, read off the first maturity interval.
    pub fn short_rate(&self, path: usize, i: usize) -> f64 {
        self.on_interval(path, i, 0)
    }

    /// Linear combination `sum_j c_j f^j` of surfaces sharing a lattice,
    /// with per-(path, time) coefficients `coef(path, i, j)`.
    pub(crate) fn combine<F>(surfaces: &[&ForwardSurface], n_paths: usize, coef: F) -> ForwardSurface
    where
        F: Fn(usize, usize, usize) -> f64,
    {
        let first = surfaces[0];
        let (n_t, w) = (first.grid.len(), first.n_maturities - 1);
        let mut interval = vec![0.0; n_paths * n_t * w];
        for p in 0..n_paths {
            for i in 0..n_t {
                let out = &mut interval[(p * n_t + i) * w..(p * n_t + i + 1) * w];
                for (j, s) in surfaces.iter().enumerate() {
                    let c = coef(p, i, j);
                    if c == 0.0 {
                        continue;
                    }
                    let r = s.row_index(p, i) * w;
                    for (o, v) in out.iter_mut().zip(&s.interval[r..r + w]) {
                        *o += c * v;
                    }
                }
            }
        }
        ForwardSurface::from_interval(first.grid.clone(), first.step, first.n_maturities, n_paths, interval)
    }

    /// Reconstructs `P(t, s) = exp(-int_t^s f)`, integrating the interval
    /// rates exactly on the lattice.
    pub fn to_term_structure(&self) -> Result<TermStructureSurface> {
        let (n_t, n_m, w) = (self.grid.len(), self.n_maturities, self.n_maturities - 1);
        let mut values = vec![0.0; self.n_paths * n_t * n_m];
        for r in 0..self.n_paths * n_t {
            let mut acc = 0.0;
            values[r * n_m] = 1.0;
            for m in 0..w {
                acc += self.interval[r * w + m] * self.step;
                values[r * n_m + m + 1] = libm::exp(-acc);
            }
        }
        TermStructureSurface::from_values(self.grid.clone(), self.step, n_m, self.n_paths, values)
    }
}

/// `f(t, s) = -d/ds ln P(t, s)` by finite log-differences.
pub fn forward_rates_of(ts: &TermStructureSurface) -> Result<ForwardSurface> {
    let n_m = ts.n_maturities();
    if n_m < 2 {
        return Err(Error::domain("forward rates need at least 2 maturities"));
    }
    let (n_t, w) = (ts.grid().len(), n_m - 1);
    let mut interval = vec![0.0; ts.n_paths() * n_t * w];
    for r in 0..ts.n_paths() * n_t {
        let row = &ts.values()[r * n_m..(r + 1) * n_m];
        for m in 0..w {
            interval[r * w + m] = -(libm::log(row[m + 1]) - libm::log(row[m])) / ts.step();
        }
    }
    Ok(ForwardSurface::from_interval(
        ts.grid().clone(),
        ts.step(),
        n_m,
        ts.n_paths(),
        interval,
    ))
}

/// One asset represented by its deflator and term structure.
#[derive(Debug, Clone, PartialEq)]
pub struct Gauge {
    pub label: String,
    pub deflator: PathEnsemble,
    pub term_structure: TermStructureSurface,
}

impl Gauge {
    pub fn new(label: impl Into<String>, deflator: PathEnsemble, term_structure: TermStructureSurface) -> Result<Self> {
        if deflator.dim() != 1 {
            return Err(Error::config("deflator must be one-dimensional"));
        }
        if deflator.grid() != term_structure.grid() {
            return Err(Error::config("deflator and term structure must share the valuation grid"));
        }
        if term_structure.n_paths() != 1 && term_structure.n_paths() != deflator.n_paths() {
            return Err(Error::config("term structure path count must be 1 or match the deflator"));
        }
        Ok(Gauge {
            label: label.into(),
            deflator,
            term_structure,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        self.deflator.grid()
    }

    pub fn n_paths(&self) -> usize {
        self.deflator.n_paths()
    }

    pub fn deflator_at(&self, path: usize, i: usize) -> f64 {
        self.deflator.value_broadcast(path, i, 0)
    }
}

pub fn forward_rates(g: &Gauge) -> Result<ForwardSurface> {
    forward_rates_of(&g.term_structure)
}

/// Short-rate paths `r_t = f(t, t+)`; single-path when the term structure is
/// deterministic.
pub fn short_rate(g: &Gauge) -> Result<PathEnsemble> {
    let f = forward_rates(g)?;
    let n_t = g.grid().len();
    let mut values = Vec::with_capacity(f.n_paths * n_t);
    for p in 0..f.n_paths {
        for i in 0..n_t {
            values.push(f.short_rate(p, i));
        }
    }
    PathEnsemble::from_values(g.grid().clone(), f.n_paths, 1, values, g.deflator.seed())
}
