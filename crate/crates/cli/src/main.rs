use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use lcsbench::error::{Error, Result};
use lcsbench::report::Report;
use lcsbench::runner::{self, RunOptions, MODULES};
use lcsbench::gallery;
use lcsbench::scenario::{Scenario, ScenarioFile};

#[derive(Parser)]
#[command(name = "lcsbench", version, about = "Verify LCS, contact and LCK geometry numerically")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the built-in scenarios.
    List,
    /// Write a built-in scenario as JSON.
    Export { name: String, path: PathBuf },
    /// Run the checks of a scenario file.
    Run {
        path: PathBuf,
        /// Comma-separated check ids or id prefixes.
        #[arg(long, value_delimiter = ',')]
        checks: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every built-in scenario.
    Suite {
        /// Restrict to one module, e.g. `reduction`.
        #[arg(long)]
        filter: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
    Text,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 2 } else { 1 })
        }
    }
}

/// Returns whether every check passed.
fn execute(cmd: Command) -> Result<bool> {
    match cmd {
        Command::List => {
            for name in gallery::NAMES {
                let f = gallery::scenario_file(name)?;
                println!("{name:<26} {}", f.description);
            }
            Ok(true)
        }
        Command::Export { name, path } => {
            let f = gallery::scenario_file(&name)?;
            std::fs::write(&path, f.to_json()?)
                .map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
            Ok(true)
        }
        Command::Run {
            path,
            checks,
            seed,
            format,
            out,
        } => {
            let sc = load(&path)?;
            let opts = RunOptions {
                seed,
                checks,
                modules: vec![],
                tolerance_scale: runner::tolerance_scale_from_env()?,
            };
            emit(&runner::run_scenarios(&[sc], &opts), format, out.as_deref())
        }
        Command::Suite {
            filter,
            seed,
            format,
            out,
        } => {
            let modules = match filter {
                Some(m) if MODULES.contains(&m.as_str()) => vec![m],
                Some(m) => {
                    return Err(Error::Invalid(format!(
                        "unknown module `{m}`; expected one of {}",
                        MODULES.join(", ")
                    )))
                }
                None => vec![],
            };
            let opts = RunOptions {
                seed,
                checks: vec![],
                modules,
                tolerance_scale: runner::tolerance_scale_from_env()?,
            };
            emit(&runner::run_scenarios(&gallery::all()?, &opts), format, out.as_deref())
        }
    }
}

/// Any failure to read or compile a scenario file is an input error.
fn load(path: &Path) -> Result<Scenario> {
    let read = || -> Result<Scenario> {
        let text = std::fs::read_to_string(path)?;
        Scenario::compile(ScenarioFile::from_json(&text)?)
    };
    read().map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))
}

fn emit(report: &Report, format: Format, out: Option<&Path>) -> Result<bool> {
    let text = match format {
        Format::Json => report.to_json()?,
        Format::Csv => report.to_csv(),
        Format::Text => report.to_text(),
    };
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(report.all_passed())
}
