use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use llsp_core::exec::ExecMode;
use llsp_core::harness::{self, HarnessError, OutputFormat, Params, RunConfig};

#[derive(Parser)]
#[command(name = "llsp", version, about = "Run and inspect the llsp scenario suite")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// List registered scenarios.
    List,
    /// Describe a scenario, its parameters and expected outcomes.
    Describe { name: String },
    /// Run a scenario; exit 0 when every expected outcome matches, 1 otherwise.
    Run {
        name: String,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long, default_value_t = 1e-8)]
        rank_tol: f64,
        /// Lower corner of the sample box.
        #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
        lo: f64,
        /// Upper corner of the sample box.
        #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
        hi: f64,
        /// Write the JSON report to this file.
        #[arg(long)]
        json: Option<PathBuf>,
        /// Scenario parameter as key=value; the value is JSON or an expression.
        #[arg(long = "param", value_name = "KEY=VALUE")]
        params: Vec<String>,
        /// JSON object of scenario parameters; --param entries take precedence.
        #[arg(long)]
        param_file: Option<PathBuf>,
        /// Leave `ms` null so reports are byte-stable.
        #[arg(long)]
        no_timing: bool,
        /// Evaluate sample points on one thread.
        #[arg(long)]
        sequential: bool,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

enum Failure {
    Usage(String),
    Io(String),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn run(cli: Cli) -> Result<bool, Failure> {
    match cli.command {
        Command::List => {
            for s in harness::list_scenarios() {
                println!("{:<24} {}", s.name, s.summary);
            }
            Ok(true)
        }
        Command::Describe { name } => {
            print!("{}", harness::describe(&name)?);
            Ok(true)
        }
        Command::Run {
            name,
            seed,
            samples,
            tol,
            rank_tol,
            lo,
            hi,
            json,
            params,
            param_file,
            no_timing,
            sequential,
            format,
        } => {
            let mut p = match &param_file {
                Some(path) => {
                    let text = fs::read_to_string(path)
                        .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
                    Params::from_json(&text)?
                }
                None => Params::new(),
            };
            let mut cli_params = Params::new();
            for a in &params {
                cli_params.parse_assignment(a)?;
            }
            p.merge(cli_params);
            let cfg = RunConfig {
                seed,
                samples,
                lo,
                hi,
                tol,
                rank_tol,
                format: match format {
                    Format::Text => OutputFormat::Text,
                    Format::Json => OutputFormat::Json,
                },
                timing: !no_timing,
                mode: if sequential {
                    ExecMode::Sequential
                } else {
                    ExecMode::Parallel
                },
            };
            let report = harness::run_scenario(&name, &cfg, &p)?;
            let text = report.to_json();
            if let Some(path) = &json {
                fs::write(path, format!("{text}\n"))
                    .map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))?;
            }
            match cfg.format {
                OutputFormat::Json => println!("{text}"),
                OutputFormat::Text => print!("{}", report.to_text()),
            }
            Ok(report.passed())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Io(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
