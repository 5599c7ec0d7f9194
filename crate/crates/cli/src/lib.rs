//! Scenario-driven front end for the feedback-loop models.
//!
//! [`run`] executes one command against a parsed [`Scenario`] and returns the
//! CSV documents it produced; the binary writes them to the output directory.

pub mod commands;
pub mod error;
pub mod scenario;

use std::fs;
use std::path::Path;

pub use commands::{Artifact, Output};
pub use error::CliError;
pub use scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    ClosedForms,
    Simulate,
    Equilibrium,
    Loop,
    Mdp,
    Sweep,
}

/// Run `command`; `seed` overrides the scenario's `seed` key.
pub fn run(command: Command, scenario: &Scenario, seed: Option<u64>) -> Result<Output, CliError> {
    let seed = match seed {
        Some(s) => s,
        None => scenario.int_or("", "seed", 0)?,
    };
    match command {
        Command::ClosedForms => commands::closed_forms(scenario),
        Command::Simulate => commands::simulate(scenario, seed),
        Command::Equilibrium => commands::equilibrium(scenario),
        Command::Loop => commands::run_loop_command(scenario, seed),
        Command::Mdp => commands::mdp(scenario, seed),
        Command::Sweep => commands::sweep(scenario, seed),
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read scenario {}: {e}", path.display())))?;
    Scenario::parse(&text)
}

/// Write every artifact into `dir`, creating it if needed.
pub fn write_artifacts(dir: &Path, artifacts: &[Artifact]) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    for a in artifacts {
        fs::write(dir.join(&a.name), &a.contents)?;
    }
    Ok(())
}
