//! The credit Novikov expectation by Monte Carlo and by quadrature.

mod mc;
mod q2;
mod quad;
mod tail;

pub use mc::{capped_lgd, lgd_factor, novikov_mc, novikov_mc_market, LgdLaw, NovikovEstimate, NovikovSettings};
pub use q2::{brownian_at, q2_statistic, Q2Form};
pub use quad::{
    novikov_quadrature, tau_density_from_simulation, DensitySpec, JointDensity, LgdDensity, QuadratureMode,
    QuadratureOutcome, QuadratureReport, QuadratureSettings, TauDensity, UniformMgf,
};
pub use tail::{tail_diagnostics, TailDiagnostics, Verdict};
