use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{log_sum_exp, Estimate};
use crate::novikov::{tail_diagnostics, TailDiagnostics};
use crate::parallel::try_map_indexed;
use crate::paths::{simulate_ito_path, Form, ItoSpec, TimeGrid};

/// `E[exp(int_0^T 1/2 (alpha^x / |sigma^x|)^2 du)]` with diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct SharpeNovikov {
    pub horizon: f64,
    /// Monte Carlo mean of the exponential with its standard error.
    pub estimate: Estimate,
    /// Log of the sample mean, finite even when `estimate` overflows.
    pub log_estimate: f64,
    /// Mean of the integrated half squared Sharpe ratio.
    pub integral: Estimate,
    pub diagnostics: TailDiagnostics,
    pub n_paths: usize,
}

const MIN_VOL: f64 = 1e-12;

/// Sharpe-ratio Novikov statistic of the portfolio with nominals `x` in the
/// market `dS = S (alpha dt + sigma dW)` on `grid`.
///
/// The portfolio return coefficients are the value-weighted averages
/// `alpha^x = sum w_j alpha_j`, `sigma^x = sum w_j sigma_j` with
/// `w_j = x_j S_j / sum x_i S_i`. The time integral is a trapezoid rule on
/// the grid. Deterministic integrands are evaluated on a single path.
pub fn novikov_sharpe(spec: &ItoSpec, x: &[f64], grid: &TimeGrid, n_paths: usize, seed: u64) -> Result<SharpeNovikov> {
    spec.validate()?;
    let (n, k) = (spec.state_dim, spec.driver_dim);
    if x.len() != n {
        return Err(Error::config("portfolio nominals have the wrong dimension"));
    }
    if n_paths == 0 {
        return Err(Error::config("n_paths must be positive"));
    }
    // The weights and return coefficients only move with the state when
    // the form is arithmetic, the coefficients are state-dependent, or
    // several assets are held.
    let active = x.iter().filter(|v| **v != 0.0).count();
    let deterministic = spec.form == Form::Geometric && spec.coefficients.state_independent() && active <= 1;
    let n_sim = if deterministic { 1 } else { n_paths };
    let times = grid.times();
    let results = try_map_indexed(n_sim, |p| {
        let mut buf = Vec::new();
        let mut integrand = Vec::with_capacity(times.len());
        let mut singular = Vec::new();
        let mut failure = None;
        simulate_ito_path(spec, grid, seed, p, &mut buf, |i, s| {
            if failure.is_some() {
                return;
            }
            let t = times[i];
            let drift = spec.drift_at(t, s);
            let vol = spec.volatility_at(t, s);
            let value: f64 = x.iter().zip(s).map(|(a, b)| a * b).sum();
            if value == 0.0 {
                failure = Some(Error::SingularPortfolio { path: p, step: i });
                return;
            }
            let mut alpha = 0.0;
            let mut sig = alloc::vec![0.0; k];
            for j in 0..n {
                // Return-form coefficients of asset j, weighted by x_j S_j / V.
                let (a, scale) = match spec.form {
                    Form::Geometric => (drift[j], x[j] * s[j] / value),
                    Form::Arithmetic => (drift[j] / s[j], x[j] * s[j] / value),
                };
                alpha += scale * a;
                for c in 0..k {
                    let v = match spec.form {
                        Form::Geometric => vol[(j, c)],
                        Form::Arithmetic => vol[(j, c)] / s[j],
                    };
                    sig[c] += scale * v;
                }
            }
            let norm = libm::sqrt(sig.iter().map(|v| v * v).sum());
            if !(norm > MIN_VOL) {
                singular.push(t);
                integrand.push(0.0);
            } else {
                let sr = alpha / norm;
                integrand.push(0.5 * sr * sr);
            }
        })?;
        if let Some(e) = failure {
            return Err(e);
        }
        let mut integral = 0.0;
        for i in 0..grid.steps() {
            integral += 0.5 * (integrand[i] + integrand[i + 1]) * grid.dt(i);
        }
        Ok((integral, singular))
    })?;
    let mut singular: Vec<f64> = results.iter().flat_map(|(_, s)| s.iter().copied()).collect();
    if !singular.is_empty() {
        singular.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
        singular.dedup();
        return Err(Error::SingularSharpe { times: singular });
    }
    let logs: Vec<f64> = results.iter().map(|(v, _)| *v).collect();
    let exps: Vec<f64> = logs.iter().map(|v| libm::exp(*v)).collect();
    Ok(SharpeNovikov {
        horizon: grid.horizon(),
        estimate: Estimate::from_samples(&exps),
        log_estimate: log_sum_exp(&logs) - libm::log(logs.len() as f64),
        integral: Estimate::from_samples(&logs),
        diagnostics: tail_diagnostics(&logs),
        n_paths: n_sim,
    })
}
