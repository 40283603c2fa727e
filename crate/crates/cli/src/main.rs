mod commands;
mod overrides;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "comanip", version, about = "Decentralized adaptive manipulation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and write its telemetry CSV and manifest.
    Run(RunArgs),
    /// Run the canned experiments and score them against the acceptance criteria.
    PaperSuite(SuiteArgs),
    /// Run the fast invariant battery.
    Check,
    /// Print a scenario config as TOML.
    Config(ScenarioArgs),
}

#[derive(Args, Clone)]
pub struct ScenarioArgs {
    /// Scenario config file (TOML).
    #[arg(long, conflicts_with = "scenario")]
    pub config: Option<PathBuf>,
    /// Canned scenario name.
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(comanip_core::scenarios::NAMES))]
    pub scenario: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// KEY=VALUE with a dotted key, e.g. `gains.lambda=2.0`. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Output directory [default: runs/<name>-seed<seed>]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct SuiteArgs {
    #[arg(long, default_value = "runs/paper-suite")]
    pub out: PathBuf,
    /// Seed for the exported per-scenario CSVs.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(a) => commands::run(&a),
        Command::PaperSuite(a) => commands::paper_suite(&a),
        Command::Check => commands::check(),
        Command::Config(a) => commands::print_config(&a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
