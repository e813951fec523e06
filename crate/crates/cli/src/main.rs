use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use subsearch_cli::commands::{
    cmd_econ, cmd_filter, cmd_fit, cmd_plan, cmd_prior, cmd_simulate, cmd_sweep_sonars, Outcome,
};
use subsearch_cli::config::ScenarioConfig;
use subsearch_cli::error::CliError;
use subsearch_cli::resolve_out_dir;
use subsearch_cli::scenario::Scenario;

/// Search planning for a disabled deep-sea submersible: trajectory
/// ensembles, Poisson location priors, Bayesian search missions, particle
/// filter tracking, sigmoid curve fits, and equipment scoring.
#[derive(Parser)]
#[command(name = "subsearch", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Built-in scenario name (paper_default, table1_sweep) or a path to
    /// a .cfg file
    #[arg(long, default_value = "paper_default")]
    scenario: String,
    /// Override one config key, e.g. --set gs_m=150 (repeatable)
    #[arg(long, value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Shorthand for --set master_seed=N
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: $SUBSEARCH_OUT_DIR, else the working
    /// directory)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the drift/sink Monte Carlo ensemble and write
    /// trajectories and landing states
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Build the Poisson location prior over the search grid
    Prior {
        #[command(flatten)]
        common: CommonArgs,
        /// Also write the Monte Carlo landing histogram field
        #[arg(long)]
        histogram: bool,
    },
    /// Simulate the search mission and write detection curves, the event
    /// log, and the final posterior
    Plan {
        #[command(flatten)]
        common: CommonArgs,
        /// Fleet size (overrides the sonar_count key)
        #[arg(long)]
        sonars: Option<usize>,
    },
    /// Success probability versus fleet size under common random numbers
    SweepSonars {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Closed-loop particle-filter tracking demo over the search schedule
    Filter {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Fit the sigmoid success model to a detection curve CSV
    Fit {
        #[command(flatten)]
        common: CommonArgs,
        /// Detection curve CSV (header t_s,cum_success_prob)
        #[arg(long)]
        input: PathBuf,
        /// Exit with a numeric failure if the fit does not converge
        #[arg(long)]
        strict: bool,
    },
    /// Rank equipment by entropy-weight cost-benefit analysis
    Econ {
        #[command(flatten)]
        common: CommonArgs,
        /// Equipment table CSV
        #[arg(long)]
        equipment: PathBuf,
    },
}

impl Command {
    fn common(&self) -> &CommonArgs {
        match self {
            Command::Simulate { common }
            | Command::Prior { common, .. }
            | Command::Plan { common, .. }
            | Command::SweepSonars { common }
            | Command::Filter { common }
            | Command::Fit { common, .. }
            | Command::Econ { common, .. } => common,
        }
    }
}

fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let common = cli.command.common();
    let mut config = ScenarioConfig::load(&common.scenario)?;
    config.apply_overrides(&common.set)?;
    if let Some(seed) = common.seed {
        config.master_seed = seed;
    }
    let out = resolve_out_dir(common.out.clone());

    // Echo the fully resolved configuration so a run is reproducible from
    // its own output.
    print!("{}", config.echo());

    let scenario = Scenario::build(config)?;
    match &cli.command {
        Command::Simulate { .. } => cmd_simulate(&scenario, &out),
        Command::Prior { histogram, .. } => cmd_prior(&scenario, &out, *histogram),
        Command::Plan { sonars, .. } => cmd_plan(&scenario, &out, *sonars),
        Command::SweepSonars { .. } => cmd_sweep_sonars(&scenario, &out),
        Command::Filter { .. } => cmd_filter(&scenario, &out),
        Command::Fit { input, strict, .. } => cmd_fit(&scenario, &out, input, *strict),
        Command::Econ { equipment, .. } => cmd_econ(&out, equipment),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => {
            for note in &outcome.notes {
                println!("{note}");
            }
            for file in &outcome.files {
                println!("wrote {}", file.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
