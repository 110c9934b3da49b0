//! Command-line driver.
//!
//! Exit codes: 0 success, 1 configuration or I/O error, 2 solver error,
//! 3 invariant violation.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use savfem::diagnostics::{check_series, InvariantTolerances};
use savfem::harness::{spatial_rate, temporal_rate, RateStudy};
use savfem::io::{execute_run, parse_config, write_rate_table, RunConfig};
use savfem::Error;

#[derive(Parser)]
#[command(name = "savfem", version, about = "SAV finite element solver for a diffuse-interface tumour growth model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation and write its outputs.
    Run { config: PathBuf },
    /// Run a simulation and verify mass conservation, energy decay and the
    /// per-step energy balance.
    Check { config: PathBuf },
    /// Spatial convergence study over `rates.levels`; prints the rate table.
    RatesSpace { config: PathBuf },
    /// Temporal convergence study over `rates.taus`; prints the rate table.
    RatesTime { config: PathBuf },
}

enum Failure {
    Error(Error),
    Invariant(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

fn load(path: &Path) -> Result<RunConfig, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    parse_config(&text)
}

fn report_study(study: &RateStudy, config: &RunConfig, file: &str) -> Result<(), Failure> {
    print!("{}", study.table.to_csv());
    if let Some(dir) = &config.output.dir {
        write_rate_table(&study.table, &dir.join(file))?;
    }
    let failed: Vec<String> = study
        .checks
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.passed())
        .map(|(i, c)| format!("level {i}:\n{c}"))
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Invariant(failed.join("\n")))
    }
}

fn execute(cli: Cli) -> Result<(), Failure> {
    let tol = InvariantTolerances::default();
    match cli.command {
        Command::Run { config } => {
            let config = load(&config)?;
            let outcome = execute_run(&config)?;
            let last = outcome.series.last().expect("series holds the initial record");
            println!(
                "steps {} time {:.6e} mass {:.16e} modified_energy {:.16e}",
                last.step, last.time, last.mass, last.modified_energy
            );
            Ok(())
        }
        Command::Check { config } => {
            let config = load(&config)?;
            let outcome = execute_run(&config)?;
            let summary = check_series(&outcome.series, &tol);
            println!("{summary}");
            if summary.passed() {
                println!("all invariants hold");
                Ok(())
            } else {
                Err(Failure::Invariant("structure invariants violated".into()))
            }
        }
        Command::RatesSpace { config } => {
            let config = load(&config)?;
            let study = spatial_rate(&config.setup, &config.rates.levels, config.rates.stride, &tol)?;
            report_study(&study, &config, "rates_space.csv")
        }
        Command::RatesTime { config } => {
            let config = load(&config)?;
            let study = temporal_rate(&config.setup, &config.rates.taus, &tol)?;
            report_study(&study, &config, "rates_time.csv")
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invariant(msg)) => {
            eprintln!("invariant violation: {msg}");
            ExitCode::from(3)
        }
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            if e.is_solver_error() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
