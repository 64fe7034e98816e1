//! Command-line front end for gridquake studies.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{SimulateArgs, StudyArgs};

#[derive(Parser)]
#[command(name = "gridquake", version, about = "Seismic power-network recovery and monitoring value simulator")]
struct Cli {
    /// Worker threads (default: available cores). Results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// More log output on stderr (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    /// Only warnings and errors on stderr.
    #[arg(short, long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

/// Flags shared by the config-driven commands.
#[derive(Args, Clone, Debug, Default)]
pub struct Overrides {
    /// Master seed; falls back to the config, then GRIDQUAKE_SEED.
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory, overriding `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// One damage scenario and one recovery realisation.
    Simulate {
        config: PathBuf,
        #[command(flatten)]
        common: Overrides,
        /// Monitoring arm to use (default: the first one).
        #[arg(long)]
        arm: Option<String>,
        #[arg(long, default_value_t = 0)]
        scenario: u64,
        #[arg(long, default_value_t = 0)]
        replicate: u64,
        /// Damage scenario JSON to use instead of sampling the hazard.
        #[arg(long)]
        damage: Option<PathBuf>,
        /// Also write the damage scenario to this path, reusable with --damage.
        #[arg(long)]
        scenario_dump: Option<PathBuf>,
    },
    /// Paired Monte Carlo study over every arm in the config.
    Study {
        config: PathBuf,
        #[command(flatten)]
        common: Overrides,
        #[arg(long)]
        scenarios: Option<usize>,
        #[arg(long)]
        perceptions: Option<usize>,
    },
    /// Coverage/accuracy grid against the baseline arm.
    Sweep {
        config: PathBuf,
        #[command(flatten)]
        common: Overrides,
        /// Comma-separated coverage and accuracy lists, e.g. `--grid 0.5 0.75,0.85,0.95`.
        #[arg(long, num_args = 2, value_names = ["P_LIST", "A_LIST"], allow_hyphen_values = true)]
        grid: Option<Vec<String>>,
    },
    /// MATPOWER case plus metadata table to native JSON.
    Convert {
        case: PathBuf,
        /// Coordinates and substation flags.
        #[arg(long)]
        meta: PathBuf,
        /// Write here instead of stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Check a run config, or a case file with --case.
    Validate {
        #[arg(required_unless_present = "case", conflicts_with = "case")]
        config: Option<PathBuf>,
        #[arg(long)]
        case: Option<PathBuf>,
        #[arg(long, requires = "case")]
        meta: Option<PathBuf>,
        #[command(flatten)]
        common: Overrides,
    },
}

/// Marks an error as caused by the invocation or its inputs (exit 1).
#[derive(Debug)]
struct UsageError;

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("invalid input")
    }
}

pub(crate) fn usage(err: impl Into<anyhow::Error>) -> anyhow::Error {
    err.into().context(UsageError)
}

fn parse_list(text: &str) -> anyhow::Result<Vec<f64>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| anyhow::anyhow!("`{s}` is not a number")))
        .collect()
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(usage(anyhow::anyhow!("--workers must be at least 1")));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Simulate { config, common, arm, scenario, replicate, damage, scenario_dump } => {
            commands::simulate(&config, &common, SimulateArgs { arm, scenario, replicate, damage, scenario_dump })
        }
        Command::Study { config, common, scenarios, perceptions } => {
            commands::study(&config, &common, StudyArgs { scenarios, perceptions })
        }
        Command::Sweep { config, common, grid } => {
            let grid = match grid {
                Some(lists) => Some((parse_list(&lists[0]).map_err(usage)?, parse_list(&lists[1]).map_err(usage)?)),
                None => None,
            };
            commands::sweep_cmd(&config, &common, grid)
        }
        Command::Convert { case, meta, output } => commands::convert(&case, Some(&meta), output.as_deref()),
        Command::Validate { config, case, meta, common } => match (config, case) {
            (Some(config), _) => commands::validate_config(&config, &common),
            (None, Some(case)) => commands::validate_case(&case, meta.as_deref()),
            (None, None) => unreachable!("clap requires one of them"),
        },
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => "warn",
        (false, 0) => "info",
        (false, 1) => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let code = if err.downcast_ref::<UsageError>().is_some() { 1 } else { 2 };
            eprintln!("error: {err:#}");
            ExitCode::from(code)
        }
    }
}
