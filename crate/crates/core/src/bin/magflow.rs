use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use magflow::harness::{describe_registry, error_exit_code, run_experiment, ExperimentSpec};

/// Run one registered experiment and write its CSV.
#[derive(Parser, Debug)]
#[command(name = "magflow", version)]
struct Cli {
    /// Experiment name (see --list).
    experiment: Option<String>,
    /// INI file; the section named after the experiment overrides defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV destination (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// List experiments with their parameters and defaults.
    #[arg(long)]
    list: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if cli.list {
        print!("{}", describe_registry());
        return ExitCode::SUCCESS;
    }
    let Some(name) = cli.experiment else {
        eprintln!("magflow: missing experiment name (try --list)");
        return ExitCode::from(2);
    };
    match run(&name, &cli.config, &cli.out) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("magflow: {e}");
            ExitCode::from(error_exit_code(&e) as u8)
        }
    }
}

fn run(name: &str, config: &Option<PathBuf>, out: &Option<PathBuf>) -> magflow::Result<i32> {
    let spec = match config {
        Some(path) => ExperimentSpec::from_ini_file(name, path)?,
        None => ExperimentSpec::defaults(name)?,
    };
    let outcome = run_experiment(&spec)?;
    let csv = outcome.to_csv()?;
    match out {
        Some(path) => std::fs::write(path, csv)
            .map_err(|e| magflow::Error::Config(format!("cannot write {}: {e}", path.display())))?,
        None => print!("{csv}"),
    }
    for c in outcome.checks.iter().filter(|c| !c.passed) {
        eprintln!("magflow: {name}: check `{}` failed: {}", c.name, c.detail);
    }
    Ok(outcome.exit_code())
}
