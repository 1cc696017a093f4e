//! `mscale`: runs one experiment pipeline per invocation and writes its CSV
//! outputs, the canonical config and a manifest into `--out`.

mod commands;
mod config;
mod output;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use mscale::RngStream;

use commands::LimitKind;
use config::Config;
use output::{Manifest, OutputDir};

#[derive(Debug)]
pub enum CliError {
    /// Invalid configuration; the message names the offending field.
    Schema(String),
    Resource(String),
    Io(String),
    Runtime(String),
}

impl CliError {
    /// Usage errors never get here: clap reports them and exits with 2.
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Schema(_) => 3,
            CliError::Resource(_) => 4,
            CliError::Io(_) | CliError::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Schema(m) => write!(f, "config error: {m}"),
            CliError::Resource(m) => write!(f, "{m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<mscale::Error> for CliError {
    fn from(e: mscale::Error) -> Self {
        use mscale::Error as E;
        match e {
            E::Resource { .. } => CliError::Resource(e.to_string()),
            E::InvalidParameter { .. } | E::Domain { .. } => CliError::Schema(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "mscale", version, about = "Monte Carlo experiments for connectivity of mobile networks")]
struct Cli {
    /// Experiment config (JSON); defaults apply when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `seeds.master`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, env = "MSCALE_THREADS")]
    threads: Option<usize>,
    #[arg(long, global = true, default_value = "mscale-out")]
    out: PathBuf,
    /// Overrides `grid.points`.
    #[arg(long, global = true)]
    grid_points: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// θ̂^M(λ, r, M) by direct Monte Carlo.
    EstimateTheta,
    /// Bracket for λ_c by bisection over the box schedule.
    EstimateLambdaC,
    /// Stretch factor μ̂ from graph distances in a window.
    EstimateMu,
    /// Slow and fast intensities on the time grid.
    EstimatePhase,
    /// Replications of the two-scale percolation time measure.
    SimulateTwoScale,
    /// Replications of the k-hop infrastructure time measure.
    SimulateKhop,
    /// Draws from one of the limit laws.
    SampleLimit {
        #[arg(value_enum)]
        kind: LimitKind,
    },
    /// KS and W1 distances between two pairings files per test function.
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
    /// Connectivity routines against brute-force references.
    Selfcheck,
}

impl Command {
    fn name(&self) -> String {
        match self {
            Command::EstimateTheta => "estimate-theta".into(),
            Command::EstimateLambdaC => "estimate-lambda-c".into(),
            Command::EstimateMu => "estimate-mu".into(),
            Command::EstimatePhase => "estimate-phase".into(),
            Command::SimulateTwoScale => "simulate-two-scale".into(),
            Command::SimulateKhop => "simulate-khop".into(),
            Command::SampleLimit { kind } => {
                let kind = clap::ValueEnum::to_possible_value(kind).expect("no skipped variants");
                format!("sample-limit-{}", kind.get_name())
            }
            Command::Compare { .. } => "compare".into(),
            Command::Selfcheck => "selfcheck".into(),
        }
    }
}

fn run(cli: Cli) -> Result<String, CliError> {
    let started = Instant::now();
    let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let mut cfg = Config::load(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.seeds.master = seed;
    }
    if let Some(points) = cli.grid_points {
        cfg.grid.points = points;
    }
    let threads = match cli.threads {
        Some(0) | None => std::thread::available_parallelism().map_or(1, |n| n.get()),
        Some(n) => n,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Runtime(format!("thread pool: {e}")))?;

    let name = cli.command.name();
    let root = RngStream::root(cfg.seeds.master, &name);
    let mut out = OutputDir::create(&cli.out)?;
    let outcome = pool.install(|| match &cli.command {
        Command::EstimateTheta => commands::estimate_theta(&cfg, root, &mut out),
        Command::EstimateLambdaC => commands::estimate_lambda_c_cmd(&cfg, root, &mut out),
        Command::EstimateMu => commands::estimate_mu(&cfg, root, &mut out),
        Command::EstimatePhase => commands::estimate_phase(&cfg, root, &mut out),
        Command::SimulateTwoScale => commands::simulate_two_scale(&cfg, root, &mut out),
        Command::SimulateKhop => commands::simulate_khop(&cfg, root, &mut out),
        Command::SampleLimit { kind } => commands::sample_limit(*kind, &cfg, root, &mut out),
        Command::Compare { a, b } => commands::compare(a, b, &mut out),
        Command::Selfcheck => commands::selfcheck(&cfg, root, &mut out),
    })?;

    out.text("config.json", &cfg.canonical())?;
    let mut outputs = out.written().to_vec();
    outputs.push("manifest.json".into());
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        subcommand: name.clone(),
        config_sha256: cfg.sha256(),
        master_seed: cfg.seeds.master,
        threads,
        outputs,
        started_unix_seconds: started_unix,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        derived: outcome.derived,
    };
    manifest.write(out.root())?;
    Ok(format!("{name}: {} [{}]", outcome.summary, out.root().display()))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("mscale: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
