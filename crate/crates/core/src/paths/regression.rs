use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::mean_variance;

/// Minimum effective sample `(sum w)^2 / sum w^2` inside the kernel window.
pub const MIN_EFFECTIVE_SAMPLE: usize = 30;

/// Minimum ensemble size for a non-degenerate kernel regression.
pub const MIN_REGRESSION_PATHS: usize = 1000;

/// Nadaraya–Watson regression with a Gaussian product kernel and Silverman
/// bandwidths per conditioning coordinate.
///
/// Coordinates with zero sample spread carry no information and are dropped
/// from the kernel; if all are dropped the estimate is the plain mean.
#[derive(Debug, Clone)]
pub struct KernelRegression {
    states: Vec<f64>,
    responses: Vec<f64>,
    state_dim: usize,
    response_dim: usize,
    bandwidth: Vec<f64>,
    n: usize,
    exact: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionEstimate {
    pub value: Vec<f64>,
    pub std_error: Vec<f64>,
    pub effective_sample: f64,
}

impl KernelRegression {
    /// `states` is `(n, state_dim)`, `responses` is `(n, response_dim)`.
    pub fn new(states: Vec<f64>, state_dim: usize, responses: Vec<f64>, response_dim: usize) -> Result<Self> {
        let n = states.len() / state_dim.max(1);
        if n == 0 || states.len() != n * state_dim || responses.len() != n * response_dim {
            return Err(Error::config("regression inputs have inconsistent shapes"));
        }
        let exponent = 1.0 / (state_dim as f64 + 4.0);
        let factor = libm::pow(4.0 / ((state_dim as f64 + 2.0) * n as f64), exponent);
        let bandwidth: Vec<f64> = (0..state_dim)
            .map(|d| {
                let col: Vec<f64> = (0..n).map(|i| states[i * state_dim + d]).collect();
                let (m, var) = mean_variance(&col);
                let sd = libm::sqrt(var);
                if sd <= 1e-12 * m.abs().max(1.0) {
                    0.0
                } else {
                    sd * factor
                }
            })
            .collect();
        let constant_responses = (0..response_dim).all(|c| {
            (1..n).all(|i| responses[i * response_dim + c] == responses[c])
        });
        let exact = constant_responses && bandwidth.iter().all(|&h| h == 0.0);
        let reg = KernelRegression {
            states,
            responses,
            state_dim,
            response_dim,
            bandwidth,
            n,
            exact,
        };
        if !reg.is_degenerate() && n < MIN_REGRESSION_PATHS {
            return Err(Error::estimation(
                "kernel regression needs more paths",
                n as f64,
                MIN_REGRESSION_PATHS,
            ));
        }
        Ok(reg)
    }

    /// True when no conditioning coordinate varies across the sample.
    pub fn is_degenerate(&self) -> bool {
        self.bandwidth.iter().all(|&h| h == 0.0)
    }

    pub fn bandwidth(&self) -> &[f64] {
        &self.bandwidth
    }

    pub fn evaluate(&self, q: &[f64]) -> Result<RegressionEstimate> {
        if q.len() != self.state_dim {
            return Err(Error::config("query has the wrong dimension"));
        }
        let mut weights = vec![0.0; self.n];
        for (i, w) in weights.iter_mut().enumerate() {
            let mut e = 0.0;
            for d in 0..self.state_dim {
                let h = self.bandwidth[d];
                if h > 0.0 {
                    let u = (self.states[i * self.state_dim + d] - q[d]) / h;
                    e += u * u;
                }
            }
            *w = libm::exp(-0.5 * e);
        }
        let sw: f64 = weights.iter().sum();
        let sw2: f64 = weights.iter().map(|w| w * w).sum();
        let effective = if sw2 > 0.0 { sw * sw / sw2 } else { 0.0 };
        // A deterministic state with deterministic responses needs no sample.
        if !self.exact && !(effective >= MIN_EFFECTIVE_SAMPLE as f64) {
            return Err(Error::estimation(
                alloc::format!("kernel window at {q:?} holds too few paths"),
                effective,
                MIN_EFFECTIVE_SAMPLE,
            ));
        }
        let m = self.response_dim;
        let mut value = vec![0.0; m];
        for (i, w) in weights.iter().enumerate() {
            for c in 0..m {
                value[c] += w * self.responses[i * m + c];
            }
        }
        for v in value.iter_mut() {
            *v /= sw;
        }
        let mut std_error = vec![0.0; m];
        for (i, w) in weights.iter().enumerate() {
            for c in 0..m {
                let r = self.responses[i * m + c] - value[c];
                std_error[c] += w * w * r * r;
            }
        }
        for s in std_error.iter_mut() {
            *s = libm::sqrt(*s) / sw;
        }
        Ok(RegressionEstimate {
            value,
            std_error,
            effective_sample: effective,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_state_gives_plain_mean() {
        let reg = KernelRegression::new(vec![1.0; 4], 1, vec![1.0, 2.0, 3.0, 6.0], 1);
        // n = 4 < MIN_EFFECTIVE_SAMPLE, so evaluation must refuse
        assert!(reg.as_ref().unwrap().is_degenerate());
        assert!(reg.unwrap().evaluate(&[1.0]).is_err());

        let states = vec![2.0; 100];
        let responses: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let reg = KernelRegression::new(states, 1, responses, 1).unwrap();
        let est = reg.evaluate(&[2.0]).unwrap();
        assert!((est.value[0] - 49.5).abs() < 1e-12);

        let reg = KernelRegression::new(vec![1.0], 1, vec![0.25], 1).unwrap();
        let est = reg.evaluate(&[1.0]).unwrap();
        assert_eq!((est.value[0], est.std_error[0]), (0.25, 0.0));
    }

    #[test]
    fn recovers_linear_regression_function() {
        // y = 3x on a uniform design: NW is unbiased in the interior.
        let n = 20_000;
        let states: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
        let responses: Vec<f64> = states.iter().map(|x| 3.0 * x).collect();
        let reg = KernelRegression::new(states, 1, responses, 1).unwrap();
        let est = reg.evaluate(&[0.5]).unwrap();
        assert!((est.value[0] - 1.5).abs() < 1e-6);
    }

    #[test]
    fn too_few_paths_is_an_estimation_error() {
        let states: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let err = KernelRegression::new(states.clone(), 1, states, 1).unwrap_err();
        assert!(matches!(err, Error::Estimation { .. }));
    }

    #[test]
    fn far_query_reports_small_effective_sample() {
        let states: Vec<f64> = (0..5000).map(|i| (i % 100) as f64 / 100.0).collect();
        let reg = KernelRegression::new(states.clone(), 1, states, 1).unwrap();
        match reg.evaluate(&[50.0]) {
            Err(Error::Estimation { effective_sample, .. }) => assert!(effective_sample < 30.0),
            other => panic!("{other:?}"),
        }
    }
}
