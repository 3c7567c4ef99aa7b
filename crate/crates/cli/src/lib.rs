//! Library half of the `dualpi` command: argument definitions, game file
//! schema, artifact export and the subcommands.

pub mod args;
pub mod commands;
pub mod config;
pub mod export;
pub mod schema;

use std::io::Write;
use std::path::Path;

use args::{Cli, Command};
use config::{resolve, FileConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Engine(#[from] dualpi::Error),
    #[error("{0} property check(s) failed")]
    PropertyFailure(usize),
}

impl CliError {
    pub fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }

    pub fn stdout(err: std::io::Error) -> Self {
        CliError::Io {
            path: "<stdout>".into(),
            message: err.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        use dualpi::Error as E;
        match self {
            CliError::Engine(E::InfeasibleGame { .. }) => 2,
            CliError::Engine(E::MaxIterExceeded { .. }) => 3,
            CliError::Engine(E::BudgetExceeded { .. }) => 5,
            CliError::PropertyFailure(_) => 4,
            _ => 1,
        }
    }
}

pub fn run(cli: &Cli, out: &mut (dyn Write + Send)) -> Result<(), CliError> {
    let cfg = FileConfig::load(cli.config.as_deref())?;
    let threads = resolve(cli.threads, cfg.threads, 1);
    if threads == 0 {
        return Err(CliError::Config("--threads must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(e.to_string()))?;
    pool.install(|| match &cli.command {
        Command::Solve(a) => commands::solve(a, &cfg, out),
        Command::Verify(a) => commands::verify(a, &cfg, out),
        Command::Sweep(a) => commands::sweep(a, &cfg, out),
        Command::Generate(a) => commands::generate(a, &cfg, out),
    })
}
