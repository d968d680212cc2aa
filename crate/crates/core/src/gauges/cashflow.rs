use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Cashflow intensity supported on the lattice `{0, step, 2 step, ...}`.
///
/// `weights[k]` is the mass at offset `k * step`.
#[derive(Debug, Clone, PartialEq)]
pub struct CashflowVector {
    step: f64,
    weights: Vec<f64>,
}

const LATTICE_TOL: f64 = 1e-9;

fn lattice_ratio(a: f64, b: f64) -> Option<usize> {
    let k = a / b;
    let r = libm::round(k);
    if r >= 1.0 && (k - r).abs() <= LATTICE_TOL * r {
        Some(r as usize)
    } else {
        None
    }
}

impl CashflowVector {
    pub fn new(step: f64, weights: Vec<f64>) -> Result<Self> {
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::config("cashflow lattice step must be positive"));
        }
        if weights.is_empty() {
            return Err(Error::config("cashflow vector needs at least one weight"));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::config("cashflow weights must be finite"));
        }
        Ok(CashflowVector { step, weights })
    }

    /// From `(offset, weight)` pairs; every offset must lie on the lattice.
    pub fn from_pairs(step: f64, pairs: &[(f64, f64)]) -> Result<Self> {
        let mut idx = Vec::with_capacity(pairs.len());
        let mut last = -1.0;
        for &(h, w) in pairs {
            if !(h >= 0.0) || h <= last {
                return Err(Error::config("cashflow offsets must be non-negative and increasing"));
            }
            last = h;
            let k = h / step;
            let r = libm::round(k);
            if (k - r).abs() > LATTICE_TOL * r.max(1.0) {
                return Err(Error::config(alloc::format!("offset {h} is not a multiple of {step}")));
            }
            idx.push((r as usize, w));
        }
        let n = idx.last().map_or(1, |(k, _)| k + 1);
        let mut weights = vec![0.0; n];
        for (k, w) in idx {
            weights[k] = w;
        }
        CashflowVector::new(step, weights)
    }

    /// Unit mass at offset `h`; the lattice step is `h` (or 1 for `h = 0`).
    pub fn dirac(h: f64) -> Result<Self> {
        if h == 0.0 {
            return CashflowVector::new(1.0, vec![1.0]);
        }
        CashflowVector::new(h, vec![0.0, 1.0])
    }

    /// Unit mass at offset `k * step`.
    pub fn dirac_on(step: f64, k: usize) -> Result<Self> {
        let mut w = vec![0.0; k + 1];
        w[k] = 1.0;
        CashflowVector::new(step, w)
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn offsets(&self) -> Vec<f64> {
        (0..self.weights.len()).map(|k| k as f64 * self.step).collect()
    }

    /// Largest offset carrying a weight slot.
    pub fn max_offset(&self) -> f64 {
        (self.weights.len() - 1) as f64 * self.step
    }

    pub fn total_mass(&self) -> f64 {
        crate::math::pairwise_sum(&self.weights)
    }

    /// Leading-coefficient test: the lattice convolution algebra inverts
    /// exactly those vectors with nonzero mass at offset 0.
    pub fn is_invertible(&self) -> bool {
        self.weights[0] != 0.0
    }

    /// Re-expresses the vector on a lattice of spacing `step`. Fails when an
    /// offset with nonzero weight falls off the new lattice.
    pub fn resample(&self, step: f64) -> Result<Self> {
        let pairs: Vec<(f64, f64)> = self
            .weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w != 0.0)
            .map(|(k, w)| (k as f64 * self.step, *w))
            .collect();
        if pairs.is_empty() {
            return CashflowVector::new(step, vec![0.0]);
        }
        CashflowVector::from_pairs(step, &pairs)
    }

    /// Weights on a finer lattice `self.step / factor`.
    pub(crate) fn refine(&self, factor: usize) -> Self {
        let mut weights = vec![0.0; (self.weights.len() - 1) * factor + 1];
        for (k, w) in self.weights.iter().enumerate() {
            weights[k * factor] = *w;
        }
        CashflowVector {
            step: self.step / factor as f64,
            weights,
        }
    }

    /// Weights on the lattice of `step`, which must divide `self.step`.
    pub(crate) fn on_lattice(&self, step: f64) -> Result<Self> {
        match lattice_ratio(self.step, step) {
            Some(1) => Ok(self.clone()),
            Some(k) => Ok(self.refine(k)),
            None => Err(Error::config(alloc::format!(
                "cashflow step {} is not a multiple of lattice step {step}; resample explicitly",
                self.step
            ))),
        }
    }
}

/// Discrete convolution `(a * b)_k = sum_i a_i b_{k-i}`.
///
/// Lattices whose steps are integer multiples of each other are brought to the
/// finer one; any other pair is rejected.
pub fn convolve(a: &CashflowVector, b: &CashflowVector) -> Result<CashflowVector> {
    let (a, b) = if let Some(k) = lattice_ratio(a.step, b.step) {
        (a.refine(k), b.clone())
    } else if let Some(k) = lattice_ratio(b.step, a.step) {
        (a.clone(), b.refine(k))
    } else {
        return Err(Error::config(alloc::format!(
            "incommensurable cashflow lattices {} and {}; resample explicitly",
            a.step,
            b.step
        )));
    };
    let step = a.step.min(b.step);
    let mut out = vec![0.0; a.weights.len() + b.weights.len() - 1];
    for (i, x) in a.weights.iter().enumerate() {
        if *x == 0.0 {
            continue;
        }
        for (j, y) in b.weights.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    CashflowVector::new(step, out)
}
