//! Default and recovery models, corporate bonds and the credit gauge.

mod market;
mod model;
mod probability;
mod thm1;

pub use market::{
    corporate_bond_price, credit_gauge, credit_jump_check, defaultable_deflator, CreditGauge, CreditMarket,
    JumpCheck, MeasureProxy, Normalization,
};
pub use model::{
    first_passage, simulate_default, DefaultKind, DefaultModel, DefaultSimulation, Intensity, LgdProcess,
};
pub use probability::{
    default_probability, implied_intensity, nelson_default_derivative, survival_curve, HazardProbe,
    ImpliedIntensity, Information, NelsonDefaultDerivative, SurvivalCurve,
};
pub use thm1::{thm1_residuals, SpreadCondition, SurvivalCondition, Thm1Report, Thm1Settings};
