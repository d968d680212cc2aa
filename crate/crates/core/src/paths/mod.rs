//! Time grids, seeded path ensembles and the stochastic-calculus estimators
//! built on them.

mod covariation;
mod ensemble;
mod grid;
mod ito;
mod martingale;
mod nelson;
mod regression;

pub use covariation::{realized_covariation, Covariation};
pub use ensemble::{simulate_brownian, brownian_increments, Increments, PathEnsemble};
pub use grid::TimeGrid;
pub use ito::{
    simulate_ito, simulate_ito_path, Coefficients, ConstantCoefficients, Form, FnCoefficients,
    ItoSpec,
};
pub use martingale::{martingale_residual, BinResidual, MartingaleResidual};
pub use nelson::{nelson_derivative, Conditioning, NelsonEstimator, NelsonMode};
pub use regression::{KernelRegression, RegressionEstimate, MIN_EFFECTIVE_SAMPLE, MIN_REGRESSION_PATHS};
