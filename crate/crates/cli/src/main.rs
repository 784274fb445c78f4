use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hypkob::Error;

mod commands;
mod config;
mod output;

#[derive(Parser, Debug)]
#[command(name = "hypkob", version, about = "Gromov-hyperbolic metric toolkit for smooth bounded domains")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides every analysis seed; the graph seed stays as configured.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding the configured one.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Boundary graph cache file: loaded when its parameters match, written otherwise.
    #[arg(long, global = true)]
    graph_cache: Option<PathBuf>,
    /// Graph refinement levels, each doubling the node count.
    #[arg(long, global = true, default_value_t = 0)]
    refine: u32,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricArg {
    G,
    D,
    Kob,
    Euclid,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapArg {
    Identity,
    Contraction,
    Rotation,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Structure, strict convexity and contact nondegeneracy checks.
    Check {
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
    /// Distances for the point pairs of a CSV file (2N numbers per row).
    Dist {
        #[arg(long, value_enum, default_value_t = MetricArg::D)]
        metric: MetricArg,
        #[arg(long)]
        pairs: PathBuf,
    },
    /// Four-point hyperbolicity constant by sampling.
    Delta {
        #[arg(long, value_enum, default_value_t = MetricArg::G)]
        metric: MetricArg,
        #[arg(long, default_value_t = 10_000)]
        n_quadruples: usize,
        /// Draw quadruples from a pool of this many points instead of fresh ones.
        #[arg(long)]
        pool: Option<usize>,
        #[arg(long, default_value_t = 0.8)]
        boundary_fraction: f64,
    },
    /// Quasi-isometry constants between two metrics on sampled pairs.
    Qi {
        #[arg(long, value_enum, default_value_t = MetricArg::Kob)]
        metric: MetricArg,
        #[arg(long, value_enum, default_value_t = MetricArg::D)]
        against: MetricArg,
        #[arg(long, default_value_t = 1000)]
        n_pairs: usize,
    },
    /// Orbits of an affine self-map and their classification.
    Orbit {
        #[arg(long, value_enum, default_value_t = MapArg::Contraction)]
        map: MapArg,
        /// Boundary fixed point of the contraction, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        target: Vec<f64>,
        #[arg(long, default_value_t = 0.9)]
        factor: f64,
        /// Rotation angles, one per complex coordinate pair.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        angles: Vec<f64>,
        #[arg(long, default_value_t = 20)]
        starts: usize,
        /// Starts are scaled towards the box center by this factor.
        #[arg(long, default_value_t = 0.9)]
        start_scale: f64,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
    },
    /// Geodesic polyline between two points and its length.
    Geodesic {
        /// Functional measuring the path; d sums graph distances over subdivisions.
        #[arg(long, value_enum, default_value_t = MetricArg::G)]
        metric: MetricArg,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        from: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        to: Vec<f64>,
    },
    /// Horizontal Lipschitz ratio of a boundary self-map.
    Lipschitz {
        #[arg(long, value_enum, default_value_t = MapArg::Rotation)]
        map: MapArg,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        angles: Vec<f64>,
        #[arg(long, default_value_t = 2000)]
        n_pairs: usize,
    },
}

/// Process exit status of a finished run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    AnalysisFailed,
    NumericalFailure,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_)
        | Error::Io(_)
        | Error::DimensionMismatch { .. }
        | Error::DimensionTooSmall(_)
        | Error::PointOutsideDomain { .. }
        | Error::Precondition(_) => 2,
        _ => 3,
    }
}

fn init_threads() -> Result<(), Error> {
    let Ok(v) = std::env::var("HYPKOB_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::Config(format!("HYPKOB_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(e.to_string()))
}

fn run(cli: Cli) -> Result<Outcome, Error> {
    init_threads()?;
    let path = cli
        .common
        .config
        .clone()
        .ok_or_else(|| Error::Config("--config is required".into()))?;
    let loaded = config::load(&path)?;
    let mut ctx = commands::Context::new(loaded, &cli.common);
    match cli.command {
        Command::Check { samples } => commands::check(&mut ctx, samples),
        Command::Dist { metric, pairs } => commands::dist(&mut ctx, metric, &pairs),
        Command::Delta {
            metric,
            n_quadruples,
            pool,
            boundary_fraction,
        } => commands::delta(&mut ctx, metric, n_quadruples, pool, boundary_fraction),
        Command::Qi {
            metric,
            against,
            n_pairs,
        } => commands::qi(&mut ctx, metric, against, n_pairs),
        Command::Orbit {
            map,
            target,
            factor,
            angles,
            starts,
            start_scale,
            steps,
        } => commands::orbit(
            &mut ctx,
            commands::OrbitArgs {
                map,
                target,
                factor,
                angles,
                starts,
                start_scale,
                steps,
            },
        ),
        Command::Geodesic { metric, from, to } => commands::geodesic(&mut ctx, metric, &from, &to),
        Command::Lipschitz { map, angles, n_pairs } => commands::lipschitz(&mut ctx, map, &angles, n_pairs),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::AnalysisFailed) => ExitCode::from(1),
        Ok(Outcome::NumericalFailure) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
