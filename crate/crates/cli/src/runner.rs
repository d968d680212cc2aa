//! `run`: validate, execute every analysis, write CSVs, then the summary.

use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::analysis::{self, Context};
use crate::error::{exit, ErrorKind, ErrorObject};
use crate::report::{self, AnalysisSummary, Status, Summary};
use crate::scenario::{self, Scenario, Severity};

/// Environment variable naming the default output root.
pub const OUT_DIR_ENV: &str = "GAT_OUT_DIR";

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub out_dir: Option<PathBuf>,
    pub summary: Option<Summary>,
    /// Errors that stopped the run before any analysis.
    pub errors: Vec<ErrorObject>,
}

impl RunOutcome {
    fn rejected(errors: Vec<ErrorObject>) -> Self {
        let exit_code = errors.iter().map(|e| e.kind.exit_code()).max().unwrap_or(exit::CONFIGURATION);
        RunOutcome {
            exit_code,
            out_dir: None,
            summary: None,
            errors,
        }
    }
}

/// `--out`, then the scenario's `output_dir`, then `$GAT_OUT_DIR/<name>`,
/// then `gat-out/<name>`.
pub fn output_dir(s: &Scenario, out: Option<&Path>) -> PathBuf {
    if let Some(o) = out {
        return o.to_path_buf();
    }
    if let Some(o) = &s.output_dir {
        return o.clone();
    }
    let root = std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| "gat-out".into());
    root.join(&s.name)
}

pub fn run_file(path: &Path, out: Option<&Path>) -> RunOutcome {
    let s = match scenario::load(path) {
        Ok(s) => s,
        Err(e) => return RunOutcome::rejected(vec![e]),
    };
    run_scenario(&s, path.parent(), out)
}

pub fn run_scenario(s: &Scenario, base: Option<&Path>, out: Option<&Path>) -> RunOutcome {
    let start = Instant::now();
    let (errors, warnings): (Vec<_>, Vec<_>) =
        scenario::check(s, base).into_iter().partition(|v| v.severity == Severity::Error);
    if !errors.is_empty() {
        return RunOutcome::rejected(
            errors
                .into_iter()
                .map(|v| ErrorObject::config(v.message).at(v.field))
                .collect(),
        );
    }
    let dir = output_dir(s, out);
    if let Err(e) = std::fs::create_dir_all(&dir) {
        return RunOutcome::rejected(vec![ErrorObject::io(&dir, e)]);
    }
    let ctx = match Context::new(s, base) {
        Ok(c) => c,
        Err(e) => return RunOutcome::rejected(vec![e]),
    };

    let mut analyses = Vec::with_capacity(s.analyses.len());
    for a in &s.analyses {
        let name = a.name();
        let t0 = Instant::now();
        let result = analysis::run(&ctx, a).and_then(|o| {
            let mut files = Vec::new();
            for (suffix, table) in &o.tables {
                let file = match suffix {
                    Some(x) => format!("{name}_{x}.csv"),
                    None => format!("{name}.csv"),
                };
                report::write_table(&dir, &file, table)?;
                files.push(file);
            }
            Ok((o, files))
        });
        let elapsed_seconds = t0.elapsed().as_secs_f64();
        analyses.push(match result {
            Ok((o, files)) => AnalysisSummary {
                status: if o.assertions.iter().all(|x| x.passed) {
                    Status::Passed
                } else {
                    Status::Failed
                },
                name,
                kind: a.kind().to_string(),
                files,
                elapsed_seconds,
                metrics: o.metrics,
                assertions: o.assertions,
                error: None,
            },
            Err(mut e) => {
                e.analysis = Some(name.clone());
                AnalysisSummary {
                    name,
                    kind: a.kind().to_string(),
                    status: Status::Error,
                    files: Vec::new(),
                    elapsed_seconds,
                    metrics: serde_json::Value::Null,
                    assertions: Vec::new(),
                    error: Some(e),
                }
            }
        });
    }

    let worst_error = analyses.iter().filter_map(|a| a.error.as_ref()).map(|e| e.kind).min_by_key(|k| match k {
        ErrorKind::Configuration => 0,
        _ => 1,
    });
    let exit_code = match worst_error {
        Some(k) => k.exit_code(),
        None if analyses.iter().any(|a| a.status == Status::Failed) => exit::ASSERTION,
        None => exit::OK,
    };
    let status = match exit_code {
        exit::OK => Status::Passed,
        exit::ASSERTION => Status::Failed,
        _ => Status::Error,
    };
    let summary = Summary {
        schema: report::SCHEMA,
        version: env!("CARGO_PKG_VERSION"),
        scenario: s.name.clone(),
        seed: s.seed,
        n_paths: s.n_paths,
        status,
        exit_code,
        elapsed_seconds: start.elapsed().as_secs_f64(),
        warnings,
        analyses,
    };
    if let Err(e) = report::write_summary(&dir, &summary) {
        return RunOutcome {
            exit_code: e.kind.exit_code(),
            out_dir: Some(dir),
            summary: Some(summary),
            errors: vec![e],
        };
    }
    RunOutcome {
        exit_code,
        out_dir: Some(dir),
        summary: Some(summary),
        errors: Vec::new(),
    }
}
