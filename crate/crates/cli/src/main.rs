//! `splr`: generate, convert, solve, recover and check SDPs with sparse plus
//! low-rank data.

mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "splr", version, about = "Sparse extension, chordal conversion and low-rank recovery for SPLR semidefinite programs")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Relative primal and dual residual tolerance for the solver
    /// (default 1e-10), or the check tolerance for `verify`.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true)]
    pub max_iter: Option<usize>,
    /// Initial ADMM penalty.
    #[arg(long, global = true)]
    pub rho: Option<f64>,
    /// Seed for generators, solver starts and verification samples.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Use the path pipeline when the decomposition is a path.
    #[arg(long, global = true)]
    pub path_mode: bool,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a generated instance.
    Gen {
        #[command(subcommand)]
        kind: GenKind,
        #[arg(long, global = true, default_value = "-")]
        out: PathBuf,
    },
    /// Build the sparse extension of a problem.
    Convert {
        /// Problem JSON, or an SDPA file when `--pattern` is given.
        #[arg(long = "in", default_value = "-")]
        input: PathBuf,
        #[arg(long, default_value = "-")]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
        /// Pattern graph (text format); switches the input to SDPA.
        #[arg(long)]
        pattern: Option<PathBuf>,
        /// Relative singular-value cutoff for the low-rank split of SDPA input.
        #[arg(long, default_value_t = 1e-9)]
        rank_tol: f64,
        /// Tree decomposition JSON to use instead of the min-degree heuristic.
        #[arg(long)]
        decomposition: Option<PathBuf>,
    },
    /// Solve the block form of an extended problem.
    Solve {
        #[arg(long = "in", default_value = "-")]
        input: PathBuf,
        /// Solver parameters JSON; flags override its fields.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long, default_value = "-")]
        out: PathBuf,
        #[arg(long)]
        stats: Option<PathBuf>,
    },
    /// Recover a low-rank solution of the original problem.
    Recover {
        #[arg(long, default_value = "-")]
        extended_solution: PathBuf,
        /// Extended problem; defaults to the one stored with the solution.
        #[arg(long)]
        problem: Option<PathBuf>,
        #[arg(long, default_value = "-")]
        out: PathBuf,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
    },
    /// Check an extension on random lifted points.
    Verify {
        #[arg(long)]
        problem: PathBuf,
        /// Extended problem; built with the default decomposition if absent.
        #[arg(long)]
        extension: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value = "-")]
        out: PathBuf,
    },
    /// Write a problem in SDPA sparse format.
    Export {
        #[arg(long = "in", default_value = "-")]
        input: PathBuf,
        #[arg(long, default_value = "-")]
        out: PathBuf,
    },
    /// Run the whole pipeline on a problem and summarise it.
    Report {
        #[arg(long = "in", default_value = "-")]
        input: PathBuf,
        #[arg(long, default_value = "-")]
        out: PathBuf,
        /// Also solve the problem as one dense block and compare objectives.
        #[arg(long)]
        dense_check: bool,
    },
}

#[derive(Subcommand, Debug)]
pub enum GenKind {
    /// diag(X) = e and one rank-one constraint; `a` is random unless given.
    Simex {
        #[arg(short, long, default_value_t = 20)]
        n: usize,
        #[arg(long, value_delimiter = ',')]
        a: Option<Vec<f64>>,
        #[arg(short, long)]
        b: Option<f64>,
    },
    /// Min-bisection on a graph file, or on a path with `n` vertices.
    Minbisect {
        #[arg(long, conflicts_with = "n")]
        graph: Option<PathBuf>,
        #[arg(short, long, default_value_t = 16)]
        n: usize,
    },
    /// Random binary quadratic program relaxation.
    Bqp {
        #[arg(short, long, default_value_t = 6)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        rows: usize,
    },
    /// The rank witness slice (written as an affine slice, not a problem).
    Phi {
        #[arg(long, default_value_t = 1)]
        ell: usize,
    },
    LbSmall {
        #[arg(long, default_value_t = 2)]
        ell: usize,
    },
    /// `lb-small(ell)` padded with an identity block of size `sigma`.
    LbPadded {
        #[arg(long, default_value_t = 2)]
        ell: usize,
        #[arg(long, default_value_t = 1)]
        sigma: usize,
        #[arg(long)]
        n_hat: Option<usize>,
    },
    LbTree {
        #[arg(long, default_value_t = 1)]
        ell: usize,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Path,
    Tree,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SPLR_LOG", "warn")).format_timestamp(None).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(t) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
