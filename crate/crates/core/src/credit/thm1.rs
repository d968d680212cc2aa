use alloc::vec::Vec;

use super::market::CreditMarket;
use super::model::{interpolate, simulate_default, DefaultModel, DefaultSimulation, Intensity};
use crate::error::{Error, Result};
use crate::gauges::{common_paths, forward_rates};
use crate::math::Estimate;
use crate::paths::TimeGrid;

/// Monte Carlo settings of the no-arbitrage residuals.
#[derive(Debug, Clone)]
pub struct Thm1Settings {
    pub n_paths: usize,
    pub seed: u64,
    /// Length of the occurrence/exposure window behind the hazard estimate.
    pub window: f64,
}

impl Default for Thm1Settings {
    fn default() -> Self {
        Thm1Settings {
            n_paths: 100_000,
            seed: 0,
            window: 5.0,
        }
    }
}

/// `r^Corp_t - r^Gov_t = beta_t LGD_t lambda_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpreadCondition {
    pub t: f64,
    pub spread: f64,
    /// `beta_t LGD_t lambda_t` with the model intensity.
    pub required: f64,
    /// `spread - required`.
    pub residual: f64,
    /// Occurrence/exposure hazard on `[t, t + window]`.
    pub hazard: Estimate,
    /// `spread - beta_t LGD_t hazard`.
    pub residual_mc: Estimate,
}

/// `P^Corp_{t,s} D^Corp_t - P^Gov_{t,s} D^Gov_t = -beta_t LGD_t E_t[exp(-int_t^s lambda)]`
/// and its government-numéraire forms.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalCondition {
    pub t: f64,
    pub s: f64,
    pub lhs: f64,
    /// Monte Carlo `E_t[exp(-int_t^s lambda)]`.
    pub expectation: Estimate,
    /// Closed form of the expectation for deterministic intensities.
    pub expectation_exact: Option<f64>,
    pub residual: Estimate,
    /// `1 - (1 + P^Cred) D^Cred - beta LGD E / (P^Gov D^Gov)`.
    pub numeraire_printed: Estimate,
    /// `1 - P^Cred (1 + D^Cred) - beta LGD E / (P^Gov D^Gov)`.
    pub numeraire_rederived: Estimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Thm1Report {
    pub spread: Vec<SpreadCondition>,
    pub survival: Vec<SurvivalCondition>,
}

fn intensity_of(market: &CreditMarket) -> Result<&Intensity> {
    match &market.default {
        DefaultModel::Intensity(i) => Ok(i),
        DefaultModel::Structural { .. } => Err(Error::MissingIntensity(
            "the default model is structural; estimate an intensity with implied_intensity and \
             pass an intensity model"
                .into(),
        )),
    }
}

fn lambda_at(intensity: &Intensity, sim: &DefaultSimulation, t: f64) -> f64 {
    match (intensity.rate(t), &sim.intensity) {
        (Some(l), _) => l,
        (None, Some(paths)) => {
            let grid = &sim.grid;
            let sum: f64 = (0..paths.n_paths())
                .map(|p| {
                    let col: Vec<f64> = (0..grid.len()).map(|i| paths.value(p, i, 0)).collect();
                    interpolate(grid, &col, t)
                })
                .sum();
            sum / paths.n_paths() as f64
        }
        (None, None) => f64::NAN,
    }
}

fn survival_expectation(sim: &DefaultSimulation, t: f64, s: f64) -> Result<Estimate> {
    match &sim.cumulative {
        Some(cum) => {
            let grid = &sim.grid;
            let alive = sim.survivors(t);
            if alive.is_empty() {
                return Err(Error::estimation(alloc::format!("every path defaulted by t = {t}"), 0.0, 1));
            }
            let xs: Vec<f64> = alive
                .iter()
                .map(|&p| {
                    let col: Vec<f64> = (0..grid.len()).map(|i| cum.value(p, i, 0)).collect();
                    libm::exp(-(interpolate(grid, &col, s) - interpolate(grid, &col, t)))
                })
                .collect();
            Ok(Estimate::from_samples(&xs))
        }
        None => sim.conditional_survival(t, s),
    }
}

/// Residuals of the spread condition at every distinct `t` and of the
/// survival condition at every `(t, s)`.
///
/// The market paths are averaged; `beta` and the LGD enter through their
/// path means at `t`.
pub fn thm1_residuals(market: &CreditMarket, pairs: &[(f64, f64)], settings: &Thm1Settings) -> Result<Thm1Report> {
    let intensity = intensity_of(market)?;
    if pairs.is_empty() || settings.n_paths == 0 || !(settings.window > 0.0) {
        return Err(Error::config("thm1 residuals need pairs, paths and a positive window"));
    }
    let grid = market.gov.grid();
    for &(t, s) in pairs {
        if !(s > t) {
            return Err(Error::config(alloc::format!("pair ({t}, {s}) needs t < s")));
        }
        grid.require_index(t)?;
    }
    let reach = pairs
        .iter()
        .map(|&(t, s)| s.max(t + settings.window))
        .fold(grid.horizon(), f64::max);
    let dt = grid.dt(0);
    let sim_grid = TimeGrid::uniform(reach, libm::ceil(reach / dt - 1e-9).max(1.0) as usize)?;
    let sim = simulate_default(&market.default, &sim_grid, settings.n_paths, settings.seed)?;

    let (fg, fc) = (forward_rates(&market.gov)?, forward_rates(&market.corp)?);
    let n = common_paths([market.gov.n_paths(), market.corp.n_paths(), market.beta.ensemble().n_paths(), fg.n_paths, fc.n_paths])?;
    let beta = market.beta.ensemble();
    let beta_mean = |i: usize| (0..n).map(|p| beta.value_broadcast(p, i, 0)).sum::<f64>() / n as f64;
    let lgd_mean = |t: f64| -> Result<f64> {
        match market.lgd.expected_at(t) {
            Some(l) => Ok(l),
            None => {
                let m = settings.n_paths.min(4096);
                let mut acc = 0.0;
                for p in 0..m {
                    acc += market.lgd.observed(t, &sim_grid, settings.seed, p)?;
                }
                Ok(acc / m as f64)
            }
        }
    };

    let mut times: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    times.sort_by(|a, b| a.total_cmp(b));
    times.dedup();
    let mut spread_rows = Vec::with_capacity(times.len());
    for &t in &times {
        let i = grid.require_index(t)?;
        let spread = (0..n).map(|p| fc.short_rate(p, i) - fg.short_rate(p, i)).sum::<f64>() / n as f64;
        let bl = beta_mean(i) * lgd_mean(t)?;
        let required = bl * lambda_at(intensity, &sim, t);
        let hazard = sim.occurrence_exposure(t, t + settings.window)?;
        spread_rows.push(SpreadCondition {
            t,
            spread,
            required,
            residual: spread - required,
            hazard,
            residual_mc: Estimate {
                value: spread - bl * hazard.value,
                std_error: bl * hazard.std_error,
            },
        });
    }

    let mut survival_rows = Vec::with_capacity(pairs.len());
    for &(t, s) in pairs {
        let i = grid.require_index(t)?;
        let bl = beta_mean(i) * lgd_mean(t)?;
        let expectation = survival_expectation(&sim, t, s)?;
        let expectation_exact = match (intensity.cumulative(t), intensity.cumulative(s)) {
            (Some(a), Some(b)) => Some(libm::exp(-(b - a))),
            _ => None,
        };
        let (mut lhs, mut printed, mut rederived, mut scale) = (0.0, 0.0, 0.0, 0.0);
        for p in 0..n {
            let (pc, pg) = (
                market.corp.term_structure.at(p, t, s)?,
                market.gov.term_structure.at(p, t, s)?,
            );
            let (dc, dg) = (market.corp.deflator_at(p, i), market.gov.deflator_at(p, i));
            lhs += pc * dc - pg * dg;
            let k = 1.0 / (pg * dg);
            let (p_cred, d_cred) = (pc / pg, dc / dg - 1.0);
            printed += 1.0 - (1.0 + p_cred) * d_cred - k * bl * expectation.value;
            rederived += 1.0 - p_cred * (1.0 + d_cred) - k * bl * expectation.value;
            scale += k;
        }
        let nf = n as f64;
        let (lhs, printed, rederived, scale) = (lhs / nf, printed / nf, rederived / nf, scale / nf);
        let se = bl * expectation.std_error;
        survival_rows.push(SurvivalCondition {
            t,
            s,
            lhs,
            expectation,
            expectation_exact,
            residual: Estimate {
                value: lhs + bl * expectation.value,
                std_error: se,
            },
            numeraire_printed: Estimate {
                value: printed,
                std_error: scale * se,
            },
            numeraire_rederived: Estimate {
                value: rederived,
                std_error: scale * se,
            },
        });
    }
    Ok(Thm1Report {
        spread: spread_rows,
        survival: survival_rows,
    })
}
