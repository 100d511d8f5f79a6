use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sigma_flow_lab::commands::{execute, Overrides};
use sigma_flow_lab::output::Summary;
use sigma_flow_lab::Command;

#[derive(Parser)]
#[command(name = "sigma-flow-lab", version, about = "Conformal sigma_k/sigma_l flow experiments")]
struct Cli {
    #[command(subcommand)]
    command: Commands,
}

#[derive(Args, Debug, Clone)]
struct RunArgs {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for the randomized suites; overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Commands {
    /// Integrate the normalized flow and write the functional trace.
    Flow(RunArgs),
    /// Run the randomized inequality and symmetric-function suites.
    Verify(RunArgs),
    /// Print the sharp constants for (n, k, l).
    Constants(RunArgs),
    /// Build the neck and bubble profiles and the glued quotient table.
    Construct(RunArgs),
    /// Run a list of flows in parallel.
    Sweep(RunArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            let mut s = Summary::new();
            s.set("status", "error");
            s.set("exit_code", 2);
            s.set("error.kind", "config");
            s.set("error.message", e.kind());
            let _ = std::fs::create_dir_all("out").and_then(|_| s.write(&PathBuf::from("out").join("summary.txt")));
            return ExitCode::from(2);
        }
    };
    let (command, args) = match cli.command {
        Commands::Flow(a) => (Command::Flow, a),
        Commands::Verify(a) => (Command::Verify, a),
        Commands::Constants(a) => (Command::Constants, a),
        Commands::Construct(a) => (Command::Construct, a),
        Commands::Sweep(a) => (Command::Sweep, a),
    };
    let inv = execute(command, &args.config, &Overrides { out: args.out, seed: args.seed });
    let status = inv.summary.get("status").unwrap_or("error");
    eprintln!("{} {status}: summary at {}", command.name(), inv.summary_path.display());
    if let Some(msg) = inv.summary.get("error.message").filter(|m| !m.is_empty()) {
        eprintln!("{msg}");
    }
    ExitCode::from(inv.exit_code as u8)
}
