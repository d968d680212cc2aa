use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gat_cli::report::Status;
use gat_cli::{exit, run_file, validate_file};

#[derive(Parser)]
#[command(name = "gat", about = "Gauge and credit arbitrage diagnostics from scenario files")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every analysis of a scenario and write CSVs plus summary.json
    Run {
        file: PathBuf,
        /// Output directory (default: scenario output_dir, then $GAT_OUT_DIR/<name>)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; results do not depend on it
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Parse and check a scenario without running it
    Validate { file: PathBuf },
    /// Print the version
    Version,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Version => {
            println!("gat {}", env!("CARGO_PKG_VERSION"));
            exit::OK
        }
        Command::Validate { file } => {
            let report = validate_file(&file);
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            if report.valid {
                exit::OK
            } else {
                exit::CONFIGURATION
            }
        }
        Command::Run { file, out, threads } => {
            if let Some(n) = threads {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    eprintln!("warning: could not size the thread pool: {e}");
                }
            }
            let outcome = run_file(&file, out.as_deref());
            for e in &outcome.errors {
                eprintln!("{}", serde_json::to_string(e).expect("error serializes"));
            }
            if let Some(s) = &outcome.summary {
                for a in &s.analyses {
                    let status = match a.status {
                        Status::Passed => "passed",
                        Status::Failed => "FAILED",
                        Status::Error => "ERROR",
                    };
                    println!("{:<28} {:<20} {:>8} {:>9.2}s", a.name, a.kind, status, a.elapsed_seconds);
                    for x in a.assertions.iter().filter(|x| !x.passed) {
                        println!("    failed {}: value {}", x.name, x.value);
                    }
                    if let Some(e) = &a.error {
                        eprintln!("{}", serde_json::to_string(e).expect("error serializes"));
                    }
                }
                if let Some(dir) = &outcome.out_dir {
                    println!("wrote {}", dir.join("summary.json").display());
                }
            }
            outcome.exit_code
        }
    };
    ExitCode::from(code as u8)
}
