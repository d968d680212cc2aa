//! Gauges: (deflator, term structure) pairs and the operations acting on them.

mod cashflow;
mod portfolio;
mod self_financing;
mod surface;
mod transform;

pub use cashflow::{convolve, CashflowVector};
pub use portfolio::{numeraire_change, portfolio_gauge, rescale_deflators, PortfolioNominals};
pub use self_financing::{self_financing_residual, SelfFinancingReport};
pub use surface::{forward_rates, short_rate, ForwardSurface, Gauge, TermStructureSurface};
pub use transform::gauge_transform;

pub(crate) use portfolio::{check_market, common_paths};
