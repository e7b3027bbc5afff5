//! Runs a registered experiment from code with one overridden parameter.
use magflow::harness::{run_experiment, ExperimentSpec};

fn main() -> magflow::Result<()> {
    let mut spec = ExperimentSpec::defaults("symbols")?;
    spec.set("radii", "0.5, 1, 2, 4")?;
    let outcome = run_experiment(&spec)?;
    print!("{}", outcome.to_csv()?);
    std::process::exit(outcome.exit_code());
}
