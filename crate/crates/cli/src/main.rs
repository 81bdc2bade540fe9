use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use colbreak_cli::{dispatch, Command};

/// Sectional solver for coagulation with collisional breakage.
#[derive(Parser)]
#[command(name = "colbreak", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Integrate one configuration and write its trajectory and manifest.
    Run(Common),
    /// Sample the model hypotheses and write assumptions.json.
    CheckAssumptions(Common),
    /// Run the configured [study] and write study.json plus TSV series.
    Study(Common),
    /// Compare against a special case with a known answer.
    CompareAnalytic(Common),
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; defaults to the rayon global pool.
    #[arg(long, value_parser = clap::value_parser!(u16).range(1..))]
    threads: Option<u16>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let (command, args) = match cli.command {
        Sub::Run(a) => (Command::Run, a),
        Sub::CheckAssumptions(a) => (Command::CheckAssumptions, a),
        Sub::Study(a) => (Command::Study, a),
        Sub::CompareAnalytic(a) => (Command::CompareAnalytic, a),
    };
    ExitCode::from(dispatch(command, &args.config, &args.out, args.threads.map(usize::from)))
}
