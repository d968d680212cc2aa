//! Gauge-theoretic arbitrage diagnostics for credit markets.
//!
//! The crate is `no_std` (with `alloc`) so the numerical core can be embedded
//! anywhere; the `std` feature only unlocks parallel path evaluation.
//!
//! Layout:
//! - [`paths`]: time grids, seeded Brownian/Itô ensembles, realized
//!   covariation, Nelson stochastic-derivative estimators.
//! - [`gauges`]: (deflator, term structure) pairs, forward rates, cashflow
//!   gauge transforms, portfolios, numéraire changes, self-financing checks.
//! - [`curvature`]: curvature components, zero-curvature residuals, Sharpe
//!   Novikov statistics and pricing-kernel checks.
//! - [`credit`]: structural and intensity default models, corporate bond
//!   pricing, the credit gauge and the no-arbitrage residuals for credit
//!   markets.
//! - [`novikov`]: Monte Carlo and quadrature evaluation of the credit Novikov
//!   condition with divergence diagnostics.
#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` is how NaN gets rejected along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod credit;
pub mod curvature;
pub mod error;
pub mod gauges;
pub mod linalg;
pub mod math;
pub mod novikov;
pub mod parallel;
pub mod paths;
pub mod quadrature;
pub mod rng;

pub use error::{Error, Result};
pub use math::Estimate;
pub use paths::{PathEnsemble, TimeGrid};
