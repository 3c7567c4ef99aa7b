use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};

const PRECEDENCE: &str = "Settings resolve as: command-line flag, then the --config TOML file, then the built-in default.";

#[derive(Debug, Parser)]
#[command(name = "dualpi", version, about = "Safety-constrained zero-sum Markov game solver", after_help = PRECEDENCE)]
pub struct Cli {
    /// Worker threads for the engines [default: 1]
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// TOML file with default settings
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run dual policy iteration and write policy, tables, set and trace
    #[command(after_help = PRECEDENCE)]
    Solve(SolveArgs),
    /// Check the engines against the brute-force oracles
    #[command(after_help = PRECEDENCE)]
    Verify(VerifyArgs),
    /// Safety fixed points over a list of gamma_h values, as CSV
    #[command(after_help = PRECEDENCE)]
    Sweep(SweepArgs),
    /// Write a game to JSON
    #[command(after_help = PRECEDENCE)]
    Generate(GenerateArgs),
}

fn parse_pair(s: &str, sep: char) -> Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(sep)
        .ok_or_else(|| format!("expected two integers separated by '{sep}', got '{s}'"))?;
    let num = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("'{t}': {e}"));
    Ok((num(a)?, num(b)?))
}

fn parse_dims(s: &str) -> Result<(usize, usize), String> {
    parse_pair(&s.to_ascii_lowercase(), 'x')
}

fn parse_cell(s: &str) -> Result<(usize, usize), String> {
    parse_pair(s, ',')
}

#[derive(Debug, Clone, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["game", "random", "grid"])))]
pub struct GameSource {
    /// Game file (JSON)
    #[arg(long)]
    pub game: Option<PathBuf>,
    /// Seeded random game
    #[arg(long)]
    pub random: bool,
    /// Gridworld of the given size, e.g. 4x4
    #[arg(long, value_parser = parse_dims, value_name = "WxH")]
    pub grid: Option<(usize, usize)>,
    /// Seed for --random [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// States for --random [default: 8]
    #[arg(long)]
    pub states: Option<usize>,
    /// Protagonist actions for --random [default: 3]
    #[arg(long)]
    pub prot_actions: Option<usize>,
    /// Adversary actions for --random [default: 3]
    #[arg(long)]
    pub adv_actions: Option<usize>,
    /// Hazard fraction for --random [default: 0.25]
    #[arg(long)]
    pub hazard_fraction: Option<f64>,
    /// Hazard cell "col,row" for --grid; repeatable
    #[arg(long = "hazard", value_parser = parse_cell, value_name = "COL,ROW")]
    pub hazards: Vec<(usize, usize)>,
    /// Goal cell "col,row" for --grid [default: bottom-right corner]
    #[arg(long, value_parser = parse_cell, value_name = "COL,ROW")]
    pub goal: Option<(usize, usize)>,
    /// Adversary push strength for --grid, 0 or 1 [default: 0]
    #[arg(long)]
    pub adv: Option<u8>,
    /// Overrides the task discount
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Overrides the safety discount
    #[arg(long)]
    pub gamma_h: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Fixed-point tolerance [default: 1e-10]
    #[arg(long)]
    pub tol: Option<f64>,
    /// Fixed-point iteration cap [default: 200000]
    #[arg(long)]
    pub max_iter: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub source: GameSource,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Output directory
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Outer iterations [default: 100]
    #[arg(long)]
    pub m: Option<usize>,
    /// Safety rounds per outer iteration [default: 2]
    #[arg(long)]
    pub n: Option<usize>,
    /// Membership threshold on max-min Q_h [default: 0]
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Extra safety rounds allowed before declaring infeasibility [default: 10]
    #[arg(long)]
    pub feasibility_retries: Option<usize>,
    /// Start each safety evaluation from zero instead of the previous table
    #[arg(long)]
    pub no_warm_start: bool,
    /// Run all outer iterations even after convergence
    #[arg(long)]
    pub no_early_exit: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExactOracle {
    /// Enumerate deterministic policy pairs (budgeted)
    Enum,
    /// Solve the undiscounted safety game level by level
    Game,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub source: GameSource,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Exact oracle for sign certification
    #[arg(long, value_enum, default_value_t = ExactOracle::Enum)]
    pub oracle: ExactOracle,
    /// Policy-pair budget for the enumeration oracle [default: 1e7]
    #[arg(long)]
    pub budget: Option<f64>,
    /// Random table pairs for the operator property sweep [default: 100]
    #[arg(long)]
    pub pairs: Option<usize>,
    /// Safety discount used for sign certification [default: 0.999]
    #[arg(long)]
    pub cert_gamma_h: Option<f64>,
    /// Check this Q_h table (CSV as written by solve) instead of solving
    #[arg(long)]
    pub qh: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub source: GameSource,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Safety discounts, comma separated
    #[arg(long, value_delimiter = ',', default_values_t = [0.9, 0.99, 0.999])]
    pub gammas: Vec<f64>,
    /// Output CSV [default: standard output]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub source: GameSource,
    /// Output JSON [default: standard output]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn parses_grid_flags() {
        let cli = Cli::try_parse_from([
            "dualpi", "solve", "--grid", "4x4", "--hazard", "0,0", "--adv", "1", "--out", "run1/",
        ])
        .unwrap();
        let Command::Solve(s) = cli.command else { panic!("expected solve") };
        assert_eq!(s.source.grid, Some((4, 4)));
        assert_eq!(s.source.hazards, vec![(0, 0)]);
        assert_eq!(s.source.adv, Some(1));
    }

    #[test]
    fn requires_exactly_one_source() {
        assert!(Cli::try_parse_from(["dualpi", "solve"]).is_err());
        assert!(Cli::try_parse_from(["dualpi", "solve", "--random", "--grid", "3x3"]).is_err());
        let cli = Cli::try_parse_from(["dualpi", "sweep", "--random", "--gammas", "0.5,0.9"]).unwrap();
        let Command::Sweep(s) = cli.command else { panic!("expected sweep") };
        assert_eq!(s.gammas, vec![0.5, 0.9]);
    }
}
