//! `umimo`: batch scenario runner for the thz-umimo models.
//!
//! Exit status: 0 on success, 2 for config or usage errors, 3 when a model
//! rejects its input, 1 for I/O failures.

mod compare;
mod config;
mod error;
mod formats;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thz_umimo::training::TrainingMethod;

use crate::error::CliError;

#[derive(Parser)]
#[command(name = "umimo", version, about = "Terahertz UM-MIMO scenario runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario config and write its CSVs and manifest.json.
    Run { config: PathBuf },
    /// Check a scenario config without running it.
    Validate { config: PathBuf },
    /// Print predicted and measured beam-training test counts as CSV.
    CompareCosts {
        /// Comma-separated training methods.
        #[arg(long, value_delimiter = ',', default_value = "exhaustive,one_sided,parallel,tree_one,tree_both")]
        methods: Vec<String>,
        /// Comma-separated grid sizes N.
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        /// Tree branching factor M.
        #[arg(long, default_value_t = 3)]
        m: usize,
        /// RF chains for parallel training.
        #[arg(long = "n-rf", default_value_t = 1)]
        n_rf: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the table here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn load(path: &Path) -> Result<(String, config::Scenario), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Schema(format!("{}: cannot read config: {e}", path.display())))?;
    let scenario = config::parse(path, &text)?;
    Ok((text, scenario))
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config } => {
            let (text, scenario) = load(&config)?;
            let dir = run::run(&config, &text, &scenario)?;
            println!("{}", dir.display());
        }
        Command::Validate { config } => {
            let (_, scenario) = load(&config)?;
            println!("ok: {} ({})", config.display(), scenario.kind.name());
        }
        Command::CompareCosts {
            methods,
            n,
            m,
            n_rf,
            seed,
            output,
        } => {
            let methods = methods
                .iter()
                .map(|s| s.parse::<TrainingMethod>().map_err(|_| CliError::Schema(format!("--methods: unknown method `{s}`"))))
                .collect::<Result<Vec<_>, _>>()?;
            let table = compare::compare_costs(&methods, &n, m, n_rf, seed)?;
            match output {
                Some(path) => std::fs::write(&path, table).map_err(|source| CliError::Io { path, source })?,
                None => print!("{table}"),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
