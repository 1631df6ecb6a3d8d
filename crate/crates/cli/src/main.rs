//! `trillt`: sampling experiments for triangle counts in G(n, p).

mod commands;
mod grid;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use trillt::Error;

#[derive(Debug, Parser)]
#[command(name = "trillt", version, about = "Local limit law experiments for triangle counts in G(n, p)")]
pub struct Cli {
    /// Worker threads; results do not depend on this value.
    #[arg(long, global = true, env = "TRILLT_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Triangle-count pmf, exact or sampled.
    Pmf(PmfArgs),
    /// Sup-distance between sigma_n * pmf and the standard normal density.
    Llt(LltArgs),
    /// Empirical characteristic function of the normalised count on a t-grid.
    Charfun(CharfunArgs),
    /// Empirical moments of the normalised count.
    Moments(MomentsArgs),
    /// Residue frequencies of the triangle count.
    Modq(ModqArgs),
    /// Instrumentation of the decoupling constructions.
    #[command(subcommand)]
    Probe(ProbeCommand),
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0.5)]
    pub p: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct PmfArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, conflicts_with = "exact", required_unless_present = "exact")]
    pub samples: Option<u64>,
    /// Enumerate all graphs instead of sampling.
    #[arg(long)]
    pub exact: bool,
    /// Allow exact enumeration at n = 8 (2^28 graphs).
    #[arg(long)]
    pub allow_large: bool,
    /// Output prefix.
    #[arg(long, default_value = "trillt-pmf")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct LltArgs {
    /// Vertex count; ignored with --sweep.
    #[arg(long, required_unless_present = "sweep")]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 0.5)]
    pub p: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, conflicts_with = "exact", required_unless_present = "exact")]
    pub samples: Option<u64>,
    #[arg(long)]
    pub exact: bool,
    /// Run every vertex count in the list and write one JSON line per run.
    #[arg(long, value_delimiter = ',', num_args = 1.., conflicts_with = "exact")]
    pub sweep: Option<Vec<usize>>,
    #[arg(long, default_value = "trillt-llt")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CharfunArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub samples: u64,
    /// Comma-separated values, `a:b:step` ranges or `log:a:b:count` ranges.
    #[arg(long, allow_hyphen_values = true)]
    pub grid: String,
    /// Boundary between the central and intermediate regions.
    #[arg(long, default_value_t = trillt::spectral::DEFAULT_A)]
    pub a: f64,
    /// Constant in the decay envelope D / |t|^1.01.
    #[arg(long, default_value_t = trillt::spectral::DEFAULT_D)]
    pub d: f64,
    #[arg(long, default_value = "trillt-charfun")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MomentsArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub samples: u64,
    #[arg(long, default_value_t = 4)]
    pub k_max: u32,
    #[arg(long, default_value = "trillt-moments")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ModqArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub samples: u64,
    #[arg(long, value_delimiter = ',', num_args = 1.., default_value = "2,3")]
    pub q: Vec<u64>,
    #[arg(long, default_value = "trillt-modq")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum ProbeCommand {
    /// C + Y + Z split of the count over k cyclic matchings.
    Decomposition(DecompositionArgs),
    /// Coordinates of h = h(A) - h(A') for random bipartite pairs.
    Hvector(HvectorArgs),
}

#[derive(Debug, Args)]
pub struct DecompositionArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
    #[arg(long, default_value = "trillt-decomposition")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct HvectorArgs {
    #[command(flatten)]
    pub common: Common,
    /// Size of the vertex class U.
    #[arg(long = "usize")]
    pub u_size: usize,
    #[arg(long, default_value_t = 1000)]
    pub trials: u64,
    #[arg(long, default_value = "trillt-hvector")]
    pub out: PathBuf,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Parameter(_) | Error::Domain(_) | Error::Empty(_) | Error::Format(_) => 2,
        Error::Numerical(_) | Error::Invariant(_) => 3,
        Error::Underpowered(_) => 4,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.threads.unwrap_or(0);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(1);
        }
    };
    let argv: Vec<String> = std::env::args().collect();
    match pool.install(|| commands::run(&cli.command, argv, pool.current_num_threads())) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
