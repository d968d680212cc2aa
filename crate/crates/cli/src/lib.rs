//! Scenario runner and file formats for `gat-core`.
//!
//! A scenario is a JSON file naming a market, a default model, an LGD law and
//! a list of analyses. `run` writes one CSV per analysis table and a
//! `summary.json` with pass/fail per assertion; `validate` only parses and
//! checks.

pub mod analysis;
pub mod build;
pub mod error;
pub mod io;
pub mod report;
pub mod runner;
pub mod scenario;
pub mod table;

pub use error::{exit, ErrorKind, ErrorObject};
pub use runner::{run_file, run_scenario, RunOutcome, OUT_DIR_ENV};
pub use scenario::{validate_file, Scenario, ValidationReport};
