//! Turns scenario specs into core objects. Simulated deflators and kernels
//! draw from seeds derived from the scenario seed.

use std::path::Path;

use gat_core::credit::{CreditMarket, DefaultModel, Intensity, LgdProcess, MeasureProxy};
use gat_core::curvature::KernelCandidate;
use gat_core::gauges::{Gauge, TermStructureSurface};
use gat_core::novikov::{LgdDensity, LgdLaw};
use gat_core::paths::{simulate_brownian, simulate_ito, Form, ItoSpec};
use gat_core::rng::{derive_seed, path_rng, Purpose};
use gat_core::{PathEnsemble, TimeGrid};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{ErrorObject, Result};
use crate::io;
use crate::scenario::{AssetSpec, BetaSpec, DefaultSpec, LgdSpec, Measure, Scenario, SdeForm, SdeSpec};

const ASSET_TAG: u64 = 0x100;
const LEVEL_TAG: u64 = 0x200;
const BETA_TAG: u64 = 0x300;

pub fn grid(s: &Scenario) -> Result<TimeGrid> {
    Ok(TimeGrid::uniform(s.grid.horizon, s.grid.steps as usize).map_err(|e| ErrorObject::from(e).at("grid"))?)
}

pub fn sde(spec: &SdeSpec) -> Result<ItoSpec> {
    let form = match spec.form {
        SdeForm::Geometric => Form::Geometric,
        SdeForm::Arithmetic => Form::Arithmetic,
    };
    Ok(ItoSpec::scalar(form, spec.initial, spec.drift, spec.vol)?)
}

fn simulated(spec: &SdeSpec, grid: &TimeGrid, n_paths: usize, seed: u64) -> Result<PathEnsemble> {
    let driver = simulate_brownian(grid, n_paths, 1, seed)?;
    Ok(simulate_ito(&sde(spec)?, &driver)?)
}

pub fn asset(
    a: &AssetSpec,
    index: usize,
    s: &Scenario,
    grid: &TimeGrid,
    step: f64,
    n_maturities: usize,
    base: Option<&Path>,
) -> Result<Gauge> {
    let n = s.n_paths as usize;
    let field = format!("market.assets[{index}]");
    let gauge = match a {
        AssetSpec::Flat {
            label,
            rate,
            deflator,
            dispersion,
        } => {
            let d = if *dispersion > 0.0 {
                let seed = derive_seed(s.seed, LEVEL_TAG + index as u64);
                let sd = *dispersion;
                let levels: Vec<f64> = (0..n)
                    .map(|p| {
                        let z: f64 = StandardNormal.sample(&mut path_rng(seed, Purpose::Auxiliary, p));
                        deflator * (sd * z - 0.5 * sd * sd).exp()
                    })
                    .collect();
                PathEnsemble::from_fn(grid.clone(), n, 1, seed, |p, _, o| o[0] = levels[p])?
            } else {
                PathEnsemble::constant(grid.clone(), 1, *deflator)?
            };
            Gauge::new(label, d, TermStructureSurface::flat(grid.clone(), step, n_maturities, *rate)?)
        }
        AssetSpec::Ito { label, rate, deflator } => {
            let d = simulated(deflator, grid, n, derive_seed(s.seed, ASSET_TAG + index as u64))?;
            Gauge::new(label, d, TermStructureSurface::flat(grid.clone(), step, n_maturities, *rate)?)
        }
        AssetSpec::File {
            label,
            deflator,
            term_structure,
        } => {
            let open = |p: &Path| {
                let full = base.map(|b| b.join(p)).unwrap_or_else(|| p.to_path_buf());
                std::fs::File::open(&full)
                    .map(std::io::BufReader::new)
                    .map_err(|e| ErrorObject::config(format!("{}: {e}", full.display())))
            };
            let d = io::read_ensemble_binary(open(deflator)?).map_err(|e| e.at(format!("{field}.deflator")))?;
            let ts = io::read_term_structure_csv(open(term_structure)?)
                .map_err(|e| e.at(format!("{field}.term_structure")))?;
            if d.grid() != grid {
                return Err(ErrorObject::config("deflator grid differs from the scenario grid").at(field));
            }
            Gauge::new(label, d, ts)
        }
    };
    gauge.map_err(|e| ErrorObject::from(e).at(field))
}

pub fn assets(s: &Scenario, grid: &TimeGrid, base: Option<&Path>) -> Result<Vec<Gauge>> {
    let m = s.market.as_ref().ok_or_else(|| ErrorObject::config("no market configured").at("market"))?;
    m.assets
        .iter()
        .enumerate()
        .map(|(i, a)| asset(a, i, s, grid, m.maturity_step, m.n_maturities as usize, base))
        .collect()
}

pub fn default_model(d: &DefaultSpec) -> Result<DefaultModel> {
    Ok(match d {
        DefaultSpec::Constant { rate } => DefaultModel::Intensity(Intensity::Constant(*rate)),
        DefaultSpec::Affine { intercept, slope } => DefaultModel::Intensity(Intensity::Affine {
            intercept: *intercept,
            slope: *slope,
        }),
        DefaultSpec::PiecewiseConstant { breaks, rates } => DefaultModel::Intensity(Intensity::PiecewiseConstant {
            breaks: breaks.clone(),
            rates: rates.clone(),
        }),
        DefaultSpec::Stochastic { sde: spec } => DefaultModel::Intensity(Intensity::Stochastic(sde(spec)?)),
        DefaultSpec::Structural { equity, barrier, bridge } => DefaultModel::Structural {
            equity: sde(equity)?,
            barrier: *barrier,
            bridge: *bridge,
        },
    })
}

pub fn scenario_default(s: &Scenario) -> Result<DefaultModel> {
    let d = s
        .default_model
        .as_ref()
        .ok_or_else(|| ErrorObject::config("no default model configured").at("default_model"))?;
    default_model(d).map_err(|e| e.at("default_model"))
}

fn scenario_lgd(s: &Scenario) -> Result<&LgdSpec> {
    s.lgd.as_ref().ok_or_else(|| ErrorObject::config("no lgd configured").at("lgd"))
}

pub fn lgd_process(s: &Scenario) -> Result<LgdProcess> {
    Ok(match scenario_lgd(s)? {
        LgdSpec::Constant { value } => LgdProcess::Constant(*value),
        LgdSpec::Uniform { lo, hi } => LgdProcess::Uniform { lo: *lo, hi: *hi },
        LgdSpec::Ito { sde: spec } => LgdProcess::Ito(sde(spec)?),
        LgdSpec::Capped { .. } => {
            return Err(ErrorObject::config("capped LGD is only defined for the Novikov analyses").at("lgd"))
        }
    })
}

pub fn lgd_law(s: &Scenario) -> Result<LgdLaw> {
    Ok(match scenario_lgd(s)? {
        LgdSpec::Capped { max, cap } => LgdLaw::Capped { max: *max, cap: *cap },
        _ => LgdLaw::Process(lgd_process(s)?),
    })
}

pub fn lgd_density(s: &Scenario) -> Result<LgdDensity> {
    Ok(match scenario_lgd(s)? {
        LgdSpec::Constant { value } => LgdDensity::Point(*value),
        LgdSpec::Uniform { lo, hi } => LgdDensity::Uniform { lo: *lo, hi: *hi },
        LgdSpec::Capped { max, cap } => LgdDensity::Capped { max: *max, cap: *cap },
        LgdSpec::Ito { .. } => return Err(ErrorObject::config("an Itô LGD has no closed-form density").at("lgd")),
    })
}

pub fn beta(s: &Scenario, grid: &TimeGrid) -> Result<KernelCandidate> {
    let e = match &s.beta {
        None => PathEnsemble::constant(grid.clone(), 1, 1.0)?,
        Some(BetaSpec::Constant { value }) => PathEnsemble::constant(grid.clone(), 1, *value)?,
        Some(BetaSpec::Ito { sde: spec }) => simulated(spec, grid, s.n_paths as usize, derive_seed(s.seed, BETA_TAG))?,
    };
    KernelCandidate::new(e).map_err(|e| ErrorObject::from(e).at("beta"))
}

/// The credit market named by `market.gov` and `market.corp`.
pub fn credit_market(s: &Scenario, grid: &TimeGrid, assets: &[Gauge]) -> Result<CreditMarket> {
    let m = s.market.as_ref().ok_or_else(|| ErrorObject::config("no market configured").at("market"))?;
    let find = |field: &str, label: &Option<String>| {
        let l = label
            .as_ref()
            .ok_or_else(|| ErrorObject::config("credit analyses need this asset").at(field))?;
        assets
            .iter()
            .find(|g| &g.label == l)
            .cloned()
            .ok_or_else(|| ErrorObject::config(format!("unknown asset {l:?}")).at(field))
    };
    let measure = match s.measure {
        Measure::Pricing => MeasureProxy::Pricing,
        Measure::Physical => MeasureProxy::Physical,
    };
    Ok(CreditMarket::new(
        find("market.gov", &m.gov)?,
        find("market.corp", &m.corp)?,
        scenario_default(s)?,
        lgd_process(s)?,
        beta(s, grid)?,
        measure,
    )?)
}
