use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Strictly increasing simulation dates starting at zero, in years.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::config("time grid needs at least 2 points"));
        }
        if times[0] != 0.0 {
            return Err(Error::config("time grid must start at 0"));
        }
        for (i, w) in times.windows(2).enumerate() {
            if !(w[1] > w[0]) || !w[1].is_finite() {
                return Err(Error::config(alloc::format!(
                    "time grid not strictly increasing at index {}",
                    i + 1
                )));
            }
        }
        Ok(TimeGrid { times })
    }

    pub fn uniform(horizon: f64, steps: usize) -> Result<Self> {
        if steps == 0 || !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::config("uniform grid needs steps >= 1 and a positive horizon"));
        }
        let dt = horizon / steps as f64;
        let mut times: Vec<f64> = (0..=steps).map(|i| i as f64 * dt).collect();
        times[steps] = horizon;
        TimeGrid::new(times)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    /// Length of the step `[t_i, t_{i+1}]`.
    pub fn dt(&self, i: usize) -> f64 {
        self.times[i + 1] - self.times[i]
    }

    /// Grid index of `t`, matched with a relative tolerance of 1e-9.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let tol = 1e-9 * t.abs().max(1.0);
        let pos = self.times.partition_point(|&x| x < t - tol);
        (pos < self.times.len() && (self.times[pos] - t).abs() <= tol).then_some(pos)
    }

    pub fn require_index(&self, t: f64) -> Result<usize> {
        self.index_of(t)
            .ok_or_else(|| Error::domain(alloc::format!("time {t} is not on the grid")))
    }

    /// Index `i` of the step containing `t`, i.e. `t_i <= t <= t_{i+1}`.
    /// `None` outside `[0, horizon]`.
    pub fn locate(&self, t: f64) -> Option<usize> {
        if !(t >= 0.0) || t > self.horizon() {
            return None;
        }
        let pos = self.times.partition_point(|&x| x <= t);
        Some(pos.saturating_sub(1).min(self.steps() - 1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(TimeGrid::new(alloc::vec![0.0]).is_err());
        assert!(TimeGrid::new(alloc::vec![0.1, 1.0]).is_err());
        assert!(TimeGrid::new(alloc::vec![0.0, 1.0, 1.0]).is_err());
        assert!(TimeGrid::new(alloc::vec![0.0, 1.0, 0.5]).is_err());
    }

    #[test]
    fn index_and_locate() {
        let g = TimeGrid::uniform(1.0, 10).unwrap();
        assert_eq!(g.index_of(0.3), Some(3));
        assert_eq!(g.index_of(0.35), None);
        assert_eq!(g.locate(0.35), Some(3));
        assert_eq!(g.locate(1.0), Some(9));
        assert_eq!(g.locate(0.0), Some(0));
        assert_eq!(g.locate(1.5), None);
    }
}
