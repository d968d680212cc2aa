use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{project_onto_range, Matrix};
use crate::math::Estimate;
use crate::parallel::try_map_indexed;
use crate::paths::{simulate_brownian, simulate_ito, Form, ItoSpec, PathEnsemble, TimeGrid};

/// Zero-curvature test at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct ZcPoint {
    /// `alpha - 1/2 c + r`.
    pub v: Vec<f64>,
    /// `||(I - P_range(sigma)) v||`.
    pub residual: f64,
    /// Minimum-norm least-squares solution of `sigma lambda = v`.
    pub market_price_of_risk: Vec<f64>,
    pub rank: usize,
    /// `residual <= 1e-8 (1 + ||v||)`.
    pub in_range: bool,
}

/// Relative tolerance for range membership of deterministic inputs.
pub const RANGE_TOLERANCE: f64 = 1e-8;

/// Evaluates the zero-curvature vector and its distance from `Range(sigma)`.
///
/// `covariation` is the rate of `<sigma, W>`; `None` means zero.
pub fn zc_point(alpha: &[f64], sigma: &Matrix, r: &[f64], covariation: Option<&[f64]>) -> Result<ZcPoint> {
    zc_point_at(alpha, sigma, r, covariation, 0, 0)
}

fn zc_point_at(
    alpha: &[f64],
    sigma: &Matrix,
    r: &[f64],
    covariation: Option<&[f64]>,
    path: usize,
    step: usize,
) -> Result<ZcPoint> {
    let n = alpha.len();
    if sigma.rows != n || r.len() != n || covariation.is_some_and(|c| c.len() != n) {
        return Err(Error::config("alpha, sigma, r and covariation dimensions disagree"));
    }
    let finite = alpha.iter().chain(r).all(|x| x.is_finite())
        && sigma.is_finite()
        && covariation.is_none_or(|c| c.iter().all(|x| x.is_finite()));
    if !finite {
        return Err(Error::NonFinite {
            path,
            step,
            what: "zero-curvature coefficients".into(),
        });
    }
    let v: Vec<f64> = (0..n)
        .map(|j| alpha[j] + r[j] - 0.5 * covariation.map_or(0.0, |c| c[j]))
        .collect();
    let proj = project_onto_range(sigma, &v);
    let norm = libm::sqrt(v.iter().map(|x| x * x).sum());
    Ok(ZcPoint {
        in_range: proj.residual <= RANGE_TOLERANCE * (1.0 + norm),
        residual: proj.residual,
        market_price_of_risk: proj.solution,
        rank: proj.rank,
        v,
    })
}

/// Short rates entering the zero-curvature vector.
#[derive(Debug, Clone)]
pub enum RateInput {
    Zero,
    /// Constant N-vector.
    Constant(Vec<f64>),
    /// N-dimensional series on the simulation grid (one path broadcasts).
    Series(PathEnsemble),
    /// Arithmetic rate dynamics driven by the same Brownian motion.
    Ito(ItoSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovariationMode {
    /// `<sigma, W> = 0`, valid for state-independent volatility.
    AnalyticZero,
    /// Realized covariation rate of `sigma(t, S_t)` with `W`.
    Estimated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZcSeries {
    pub times: Vec<f64>,
    /// Mean residual across paths.
    pub residual: Vec<Estimate>,
    pub max_residual: Vec<f64>,
    /// Mean minimum-norm market price of risk.
    pub market_price_of_risk: Vec<Vec<f64>>,
    /// Estimated covariation rate per component (estimated mode only).
    pub covariation: Option<Vec<Vec<Estimate>>>,
    pub rank: Vec<usize>,
    pub in_range: Vec<bool>,
}

impl ZcSeries {
    pub fn all_in_range(&self) -> bool {
        self.in_range.iter().all(|x| *x)
    }

    pub fn max(&self) -> f64 {
        self.max_residual.iter().cloned().fold(0.0, f64::max)
    }
}

/// Return-form coefficients `(alpha, sigma)` of `dS = S (alpha dt + sigma dW)`.
fn return_coefficients(spec: &ItoSpec, t: f64, s: &[f64], path: usize, step: usize) -> Result<(Vec<f64>, Matrix)> {
    let mut alpha = spec.drift_at(t, s);
    let mut sigma = spec.volatility_at(t, s);
    if spec.form == Form::Arithmetic {
        for j in 0..spec.state_dim {
            if s[j] == 0.0 {
                return Err(Error::NonFinite {
                    path,
                    step,
                    what: "return coefficients of a vanishing price".into(),
                });
            }
            alpha[j] /= s[j];
            for k in 0..spec.driver_dim {
                sigma[(j, k)] /= s[j];
            }
        }
    }
    Ok((alpha, sigma))
}

/// Zero-curvature residual series of the market `dS = S (alpha dt + sigma dW)`
/// with short rates `rates`.
///
/// Simulation (`n_paths` paths from `seed`) is only performed when the
/// coefficients depend on the state, the rates are stochastic, or the
/// covariation is estimated.
pub fn zc_residual(
    spec: &ItoSpec,
    rates: &RateInput,
    mode: CovariationMode,
    grid: &TimeGrid,
    n_paths: usize,
    seed: u64,
) -> Result<ZcSeries> {
    spec.validate()?;
    let (n, k) = (spec.state_dim, spec.driver_dim);
    let state_free = spec.coefficients.state_independent() && spec.form == Form::Geometric;
    if mode == CovariationMode::AnalyticZero && !state_free {
        return Err(Error::config(
            "analytic-zero covariation requires state-independent return volatility",
        ));
    }
    let rate_paths = match rates {
        RateInput::Zero => 1,
        RateInput::Constant(r) => {
            if r.len() != n {
                return Err(Error::config("rate vector has the wrong dimension"));
            }
            1
        }
        RateInput::Series(e) => {
            if e.dim() != n || e.grid() != grid {
                return Err(Error::config("rate series must be N-dimensional on the simulation grid"));
            }
            e.n_paths()
        }
        RateInput::Ito(r) => {
            if r.state_dim != n || r.driver_dim != k || r.form != Form::Arithmetic {
                return Err(Error::config("rate dynamics must be arithmetic, N-dimensional and share the driver"));
            }
            n_paths
        }
    };
    let simulate = !state_free || mode == CovariationMode::Estimated || rate_paths > 1;
    let n_sim = if simulate { n_paths } else { 1 };
    if n_sim == 0 {
        return Err(Error::config("n_paths must be positive"));
    }
    let (states, rate_ens) = if simulate {
        let w = simulate_brownian(grid, n_sim, k, seed)?;
        let s = simulate_ito(spec, &w)?;
        let r = match rates {
            RateInput::Ito(r) => Some(simulate_ito(r, &w)?),
            _ => None,
        };
        (Some((s, w)), r)
    } else {
        (None, None)
    };
    let rate_at = |p: usize, i: usize| -> Vec<f64> {
        match rates {
            RateInput::Zero => vec![0.0; n],
            RateInput::Constant(r) => r.clone(),
            RateInput::Series(e) => (0..n).map(|j| e.value_broadcast(p, i, j)).collect(),
            RateInput::Ito(_) => {
                let e = rate_ens.as_ref().expect("simulated rates");
                e.state(p, i).to_vec()
            }
        }
    };
    let n_t = grid.len();
    let last = if mode == CovariationMode::Estimated { n_t - 1 } else { n_t };
    if last == 0 {
        return Err(Error::domain("estimated covariation needs at least one grid step"));
    }

    // Per path, per time: alpha, sigma.
    let coeffs = try_map_indexed(n_sim, |p| {
        let mut row = Vec::with_capacity(n_t);
        for i in 0..n_t {
            let s = match &states {
                Some((s, _)) => s.state(p, i).to_vec(),
                None => spec.initial_state.clone(),
            };
            row.push(return_coefficients(spec, grid.times()[i], &s, p, i)?);
        }
        Ok(row)
    })?;

    let covariation: Option<Vec<Vec<Estimate>>> = match (&states, mode) {
        (Some((_, w)), CovariationMode::Estimated) => Some(
            (0..last)
                .map(|i| {
                    let dt = grid.dt(i);
                    (0..n)
                        .map(|j| {
                            let xs: Vec<f64> = (0..n_sim)
                                .map(|p| {
                                    let (s0, s1) = (&coeffs[p][i].1, &coeffs[p][i + 1].1);
                                    (0..k)
                                        .map(|c| {
                                            (s1[(j, c)] - s0[(j, c)]) * (w.value(p, i + 1, c) - w.value(p, i, c))
                                        })
                                        .sum::<f64>()
                                        / dt
                                })
                                .collect();
                            Estimate::from_samples(&xs)
                        })
                        .collect()
                })
                .collect(),
        ),
        _ => None,
    };

    let mut out = ZcSeries {
        times: grid.times()[..last].to_vec(),
        residual: Vec::with_capacity(last),
        max_residual: Vec::with_capacity(last),
        market_price_of_risk: Vec::with_capacity(last),
        covariation: covariation.clone(),
        rank: Vec::with_capacity(last),
        in_range: Vec::with_capacity(last),
    };
    for i in 0..last {
        let c: Option<Vec<f64>> = covariation.as_ref().map(|c| c[i].iter().map(|e| e.value).collect());
        let c_se: f64 = covariation
            .as_ref()
            .map_or(0.0, |c| libm::sqrt(c[i].iter().map(|e| e.std_error * e.std_error).sum()));
        let mut res = Vec::with_capacity(n_sim);
        let mut lambda = vec![0.0; k];
        let mut rank = usize::MAX;
        let mut gate: f64 = 0.0;
        for p in 0..n_sim {
            let (alpha, sigma) = &coeffs[p][i];
            let pt = zc_point_at(alpha, sigma, &rate_at(p, i), c.as_deref(), p, i)?;
            res.push(pt.residual);
            for (l, x) in lambda.iter_mut().zip(&pt.market_price_of_risk) {
                *l += x / n_sim as f64;
            }
            rank = rank.min(pt.rank);
            let norm = libm::sqrt(pt.v.iter().map(|x| x * x).sum());
            gate = gate.max(RANGE_TOLERANCE * (1.0 + norm));
        }
        let est = Estimate::from_samples(&res);
        let max = res.iter().cloned().fold(0.0, f64::max);
        // Estimated covariation: 3 standard errors of the 1/2 c term.
        let in_range = if covariation.is_some() {
            est.value <= gate + 1.5 * c_se
        } else {
            max <= gate
        };
        out.residual.push(est);
        out.max_residual.push(max);
        out.market_price_of_risk.push(lambda);
        out.rank.push(rank);
        out.in_range.push(in_range);
    }
    Ok(out)
}
