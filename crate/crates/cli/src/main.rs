use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use openmind_core::pipeline::{self, CommonOptions, Outputs, ReportOptions, SimulateOptions};
use openmind_core::sim::{Schedule, SimConfig, Topology};
use openmind_core::validation::ValidationConfig;
use openmind_core::{Error, Execution, Thresholds};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_INVARIANT: u8 = 3;

/// Estimate per-user confidence bounds from monthly opinions and interactions.
#[derive(Debug, Parser)]
#[command(name = "openmind", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Average post scores into monthly leaning scores and labels.
    Leaning {
        #[arg(long)]
        posts: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Per-month network statistics (nodes by leaning, edges, degree, assortativity).
    GraphStats {
        #[arg(long)]
        posts: PathBuf,
        #[arg(long)]
        interactions: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Leaning transition matrices over contiguous months.
    Transitions {
        #[arg(long)]
        posts: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Confidence-bound estimates for every contiguous month pair.
    Estimate {
        #[arg(long)]
        posts: PathBuf,
        #[arg(long)]
        interactions: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run the bounded-confidence simulator and export posts/interactions CSVs.
    Simulate(SimulateArgs),
    /// Simulate with known bounds, estimate them back, and check recovery.
    Validate(ValidateArgs),
    /// Histograms, KS tests, skewness and per-user dispersion of the estimates.
    Report {
        #[arg(long)]
        posts: PathBuf,
        #[arg(long)]
        interactions: PathBuf,
        #[arg(long, default_value_t = 20)]
        bins: usize,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long, default_value_t = 0.4)]
    dem_threshold: f64,
    #[arg(long, default_value_t = 0.6)]
    rep_threshold: f64,
    /// Count malformed rows as dropped instead of failing.
    #[arg(long)]
    lenient: bool,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Disable data-parallel execution.
    #[arg(long)]
    sequential: bool,
}

impl RunArgs {
    fn exec(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ScheduleArg {
    RandomPair,
    Matching,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, default_value_t = 100)]
    agents: usize,
    #[arg(long, default_value_t = 0.2)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.5)]
    mu: f64,
    /// `complete`, or `random:P` for an Erdős–Rényi graph with edge probability P.
    #[arg(long, default_value = "complete")]
    topology: String,
    #[arg(long, value_enum, default_value_t = ScheduleArg::RandomPair)]
    schedule: ScheduleArg,
    /// Number of exported months.
    #[arg(long, default_value_t = 20)]
    months: u64,
    /// Steps per month; defaults to the number of agents.
    #[arg(long)]
    window: Option<u64>,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[arg(long, default_value_t = 100)]
    agents: usize,
    #[arg(long, default_value_t = 0.2)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.5)]
    mu: f64,
    /// Matching rounds; each becomes one month.
    #[arg(long, default_value_t = 1000)]
    rounds: u64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Core(Error),
    RecoveryViolated(usize),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn common_options(c: &Common) -> Result<CommonOptions, Failure> {
    let thresholds = Thresholds::new(c.dem_threshold, c.rep_threshold).map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(CommonOptions { thresholds, lenient: c.lenient, exec: c.run.exec() })
}

fn parse_topology(s: &str) -> Result<Topology, Failure> {
    if s == "complete" {
        return Ok(Topology::Complete);
    }
    s.strip_prefix("random:")
        .and_then(|p| p.parse::<f64>().ok())
        .map(|p| Topology::Random { p })
        .ok_or_else(|| Failure::Usage(format!("unknown topology {s:?}; use `complete` or `random:P`")))
}

fn commit(out: &Outputs, dir: &Path) -> Result<(), Failure> {
    for path in out.commit(dir)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Leaning { posts, common } => {
            let opts = common_options(&common)?;
            commit(&pipeline::cmd_leaning(&posts, &opts)?, &common.run.out_dir)
        }
        Command::GraphStats { posts, interactions, common } => {
            let opts = common_options(&common)?;
            commit(&pipeline::cmd_graph_stats(&posts, &interactions, &opts)?, &common.run.out_dir)
        }
        Command::Transitions { posts, common } => {
            let opts = common_options(&common)?;
            commit(&pipeline::cmd_transitions(&posts, &opts)?, &common.run.out_dir)
        }
        Command::Estimate { posts, interactions, common } => {
            let opts = common_options(&common)?;
            commit(&pipeline::cmd_estimate(&posts, &interactions, &opts)?, &common.run.out_dir)
        }
        Command::Report { posts, interactions, bins, common } => {
            let opts = ReportOptions { common: common_options(&common)?, bins };
            commit(&pipeline::cmd_report(&posts, &interactions, &opts)?, &common.run.out_dir)
        }
        Command::Simulate(args) => {
            if args.months < 2 {
                return Err(Failure::Usage("need at least 2 months".into()));
            }
            let window = args.window.unwrap_or(args.agents as u64);
            let mut config = SimConfig::new(args.agents, args.epsilon, window * (args.months - 1), args.seed);
            config.mu = args.mu;
            config.topology = parse_topology(&args.topology)?;
            config.schedule = match args.schedule {
                ScheduleArg::RandomPair => Schedule::RandomPair,
                ScheduleArg::Matching => Schedule::Matching,
            };
            config.snapshot_every = window;
            commit(&pipeline::cmd_simulate(&SimulateOptions { config, window })?, &args.run.out_dir)
        }
        Command::Validate(args) => {
            let mut config = ValidationConfig::new(args.agents, args.epsilon, args.seed);
            config.mu = args.mu;
            config.rounds = args.rounds;
            let (out, report) = pipeline::cmd_validate(&config, args.run.exec())?;
            commit(&out, &args.run.out_dir)?;
            println!(
                "epsilon {}: {} estimates, {} exact single-neighbor, bound violations {}, final clusters {}",
                config.epsilon,
                report.n_results,
                report.exact_single_neighbor,
                report.bound_violations.len(),
                report.final_clusters
            );
            if let Some(f) = report.fraction_updating_within_bound {
                println!("updating agents with cb_hat <= epsilon: {f:.4}");
            }
            if !report.recovery_holds {
                return Err(Failure::RecoveryViolated(report.bound_violations.len()));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::RecoveryViolated(n)) => {
            eprintln!("error: {n} zero-error estimates exceed the true confidence bound");
            ExitCode::from(EXIT_INVARIANT)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::Invariant(_) => EXIT_INVARIANT,
                Error::InvalidConfig(_) | Error::InvalidThresholds { .. } => EXIT_USAGE,
                _ => EXIT_DATA,
            };
            ExitCode::from(code)
        }
    }
}
