use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

use tagcast::sim::rng::DEFAULT_SEED;
use tagcast::Error;

#[derive(Parser, Debug)]
#[command(
    name = "tagcast",
    version,
    about = "Warning-controlled news propagation: fixed points, simulation, optimal warnings"
)]
struct Cli {
    /// Print diagnostics to stderr.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct ScenarioArgs {
    /// Scenario file (`key = value` lines or a flat JSON object).
    #[arg(long, short = 's')]
    scenario: PathBuf,

    /// Override a scenario key, e.g. `--set eta_c=0.3`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    /// Friend counts drawn from the scenario's degree model.
    DegreeModel,
    /// Friends are the out-neighbours in a follower graph.
    Network,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Limit proportions and, for a fake/real pair, both performance measures.
    Solve {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Write the JSON result here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte-Carlo simulation of the spreading process.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value_t = 1)]
        paths: usize,
        /// Stop each path after this many wake-ups.
        #[arg(long, conflicts_with = "horizon")]
        events: Option<u64>,
        /// Stop each path at this simulation time.
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Mode::DegreeModel)]
        mode: Mode,
        /// Edge list or binary cache; required in network mode.
        #[arg(long)]
        graph: Option<PathBuf>,
        /// Restrict the graph to this many uniformly drawn nodes.
        #[arg(long)]
        subsample: Option<usize>,
        /// Initial fake-tagged copies.
        #[arg(long, default_value_t = 1)]
        init_fake: u64,
        /// Initial real-tagged copies.
        #[arg(long, default_value_t = 0)]
        init_real: u64,
        /// Event CSV of the first path.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Summary JSON; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Optimal warning under the type-2 tolerance `c`.
    Optimize {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Type-2 tolerance; falls back to `c` in the scenario.
        #[arg(long)]
        c: Option<f64>,
        /// Optimal curve over `start:stop:step` values of `c`.
        #[arg(long, value_name = "START:STOP:STEP", conflicts_with = "c")]
        c_range: Option<String>,
        /// Initial step size of the schedule `kappa0 / (1 + l)`.
        #[arg(long, default_value_t = 0.5)]
        kappa0: f64,
        /// Starting point; midpoint of the feasible interval by default.
        #[arg(long)]
        w0: Option<f64>,
        /// Points of the constraint-curve profile.
        #[arg(long, default_value_t = 101)]
        sweep_points: usize,
        /// Constraint-curve profile CSV (single `c`), or the optimal curve CSV (`--c-range`).
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate the mean-field ODE.
    Ode {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Start, defaults to the equilibrium.
        #[arg(long, requires = "theta0")]
        psi0: Option<f64>,
        #[arg(long, requires = "psi0")]
        theta0: Option<f64>,
        #[arg(long, default_value_t = tagcast::ode::DEFAULT_HORIZON)]
        horizon: f64,
        #[arg(long, default_value_t = tagcast::ode::DEFAULT_STEP)]
        step: f64,
        /// Integrate from a lattice of starts around the equilibrium instead.
        #[arg(long)]
        attractor: bool,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        #[arg(long, default_value_t = 10)]
        grid: usize,
        /// Trajectory CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Coupled paths under two ordered policies; checks the dominance at every event.
    Couple {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        w1: f64,
        #[arg(long)]
        b1: f64,
        #[arg(long)]
        w2: f64,
        #[arg(long)]
        b2: f64,
        #[arg(long, default_value_t = 100_000)]
        events: u64,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        init_fake: u64,
        #[arg(long, default_value_t = 0)]
        init_real: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Load an edge list and report degree statistics.
    Ingest {
        #[arg(long)]
        graph: PathBuf,
        /// Also write the binary graph cache.
        #[arg(long)]
        cache: Option<PathBuf>,
        #[arg(long)]
        subsample: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Infeasible { .. } => 3,
        Error::Invariant(_)
        | Error::NoBracket { .. }
        | Error::NonFinite { .. }
        | Error::DegenerateSensitivity { .. } => 4,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command, cli.verbose) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
