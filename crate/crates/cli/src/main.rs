use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mlfeedback_cli::{load_scenario, run, write_artifacts, CliError, Command};

#[derive(Parser)]
#[command(name = "mlfeedback", version, about = "Pricing feedback-loop experiments")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// Scenario file.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Output directory for CSV files.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Master seed; overrides the scenario's `seed` key.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Closed-form list prices, value and payoff moments.
    ClosedForms,
    /// Monte Carlo seller games against the exact moments.
    Simulate,
    /// Reliance equilibria and condition checks.
    Equilibrium,
    /// Multi-period feedback-loop simulation.
    Loop,
    /// Full-model seller decision process.
    Mdp,
    /// Parameter sweep over the grids in [sweep].
    Sweep,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::ClosedForms => Command::ClosedForms,
            Cmd::Simulate => Command::Simulate,
            Cmd::Equilibrium => Command::Equilibrium,
            Cmd::Loop => Command::Loop,
            Cmd::Mdp => Command::Mdp,
            Cmd::Sweep => Command::Sweep,
        }
    }
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let path = cli
        .scenario
        .as_ref()
        .ok_or_else(|| CliError::Usage("--scenario <path> is required".into()))?;
    let scenario = load_scenario(path)?;
    let output = run(cli.command.into(), &scenario, cli.seed)?;
    write_artifacts(&cli.out, &output.artifacts)?;
    for line in &output.report {
        println!("{line}");
    }
    for a in &output.artifacts {
        println!("wrote {}", cli.out.join(&a.name).display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
