//! `wqed`: run waveguide-QED scenarios from JSON files.

mod commands;
mod output;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "wqed", version, about = "Collision-model, master-equation and trajectory simulations of emitters on a chiral waveguide")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Integrate the master equation.
    Me(Common),
    /// Run the collision model.
    Collide(Common),
    /// Average photon-counting trajectories.
    Traj(Common),
    /// Scan coupling phases for decoherence-free points.
    DfScan(Common),
    /// Print the master-equation coefficient table.
    Coeffs(Common),
    /// Compare the collision model with the master equation over several time steps.
    Compare(Common),
    /// Validate a scenario and print it with defaults filled in.
    Check(Common),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Scenario file (JSON).
    pub scenario: PathBuf,
    /// Master seed for trajectories.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Time step; overrides the scenario.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Number of trajectories.
    #[arg(long)]
    pub n_traj: Option<usize>,
    /// Directory for output files.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    /// Record every `stride` steps.
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Worker threads for trajectories (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Me(c) => commands::run("me", c),
        Command::Collide(c) => commands::run("collide", c),
        Command::Traj(c) => commands::run("traj", c),
        Command::DfScan(c) => commands::run("df-scan", c),
        Command::Coeffs(c) => commands::run("coeffs", c),
        Command::Compare(c) => commands::run("compare", c),
        Command::Check(c) => commands::run("check", c),
    };
    match result {
        Ok(summary) => {
            println!("{}", serde_json::to_string_pretty(&summary).expect("summary serialises"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            let code = e.exit_code();
            eprintln!("{}", serde_json::json!({ "error": { "kind": e.kind(), "message": e.to_string() }, "exit_code": code }));
            ExitCode::from(code)
        }
    }
}
