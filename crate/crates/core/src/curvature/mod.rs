//! Arbitrage as curvature: cross-asset dispersion of `D log D^j + r^j`,
//! zero-curvature residuals, the Sharpe-ratio Novikov statistic and
//! pricing-kernel checks.

mod components;
mod kernel;
mod sharpe;
mod zc;

pub use components::{curvature_components, CurvatureReport};
pub use kernel::{kernel_check, KernelCandidate, KernelResidual};
pub use sharpe::{novikov_sharpe, SharpeNovikov};
pub use zc::{zc_point, zc_residual, CovariationMode, RateInput, ZcPoint, ZcSeries};

/// Number of paths whose states serve as evaluation points for conditional
/// estimates.
pub const PROBE_PATHS: usize = 32;
