//! `rentropy`: runs scenarios, check suites and parameter sweeps, and writes
//! CSV/JSON artifacts with a manifest per run.

mod output;
mod run;
mod sweep;
mod verify;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

/// Process exit status.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Status {
    Ok = 0,
    ChecksFailed = 1,
    Numerical = 2,
    Config = 3,
}

#[derive(Parser)]
#[command(name = "rentropy", version, about = "Heat kernels, pointed entropies and checks on model Ricci flows")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output root; overrides RENTROPY_OUT.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one scenario, write kernel and entropy CSVs, run its checks.
    Run {
        config: PathBuf,
    },
    /// Run a check suite on built-in scenarios.
    Verify {
        /// Suite name (default, identities, inequalities, trends, diagnostics) or check id.
        #[arg(default_value = "default")]
        suite: String,
        /// `all` or a comma-separated list of scenario names.
        #[arg(long, default_value = "all")]
        zoo: String,
        /// Scenario files to run instead of (or besides) the built-ins.
        #[arg(long = "config")]
        configs: Vec<PathBuf>,
    },
    /// Repeat a scenario along one parameter axis.
    Sweep {
        config: PathBuf,
        /// nodes, truncation, depth, tau, or param:<json pointer into the config>.
        #[arg(long)]
        axis: String,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        values: Vec<String>,
        /// Also tabulate volume ratios at the base point.
        #[arg(long)]
        ratios: bool,
    },
    /// Print the JSON schema of scenario files.
    Schema,
}

/// Maps a failure to its exit status: numerical breakdowns are 2, everything else 3.
fn classify(err: &anyhow::Error) -> Status {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<ricci_entropy::Error>() {
            use ricci_entropy::Error as E;
            return if e.is_numerical() || matches!(e, E::Stencil { .. } | E::MissingSlice(_)) {
                Status::Numerical
            } else {
                Status::Config
            };
        }
    }
    Status::Config
}

fn dispatch(cli: Cli) -> anyhow::Result<Status> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global()?;
    }
    let root = output::root(cli.out.as_deref());
    match cli.command {
        Command::Run { config } => run::cmd_run(&config, &root),
        Command::Verify { suite, zoo, configs } => verify::cmd_verify(&suite, &zoo, &configs, &root),
        Command::Sweep {
            config,
            axis,
            values,
            ratios,
        } => sweep::cmd_sweep(&config, &axis, &values, ratios, &root),
        Command::Schema => {
            let schema = schemars::schema_for!(ricci_entropy::ScenarioConfig);
            println!("{}", serde_json::to_string_pretty(&schema)?);
            Ok(Status::Ok)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(status) => ExitCode::from(status as u8),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(classify(&err) as u8)
        }
    }
}
