mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "esparsify", version, about = "Eulerian sparsifiers, sketches and solvers")]
struct Cli {
    /// Caps internal parallelism; outputs do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileArg {
    Paper,
    Practical,
}

#[derive(Clone, Copy, Debug, ValueEnum, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GenKind {
    /// Random Eulerian multigraph-free graph.
    Eulerian,
    /// Random connected undirected graph, written head < tail.
    Undirected,
    Complete,
    Cycle,
}

#[derive(Clone, Copy, Debug, ValueEnum, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SketchMode {
    Eulerian,
    Undirected,
}

#[derive(Clone, Copy, Debug, ValueEnum, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DecompKind {
    Er,
    Expander,
}

#[derive(Args, Debug, serde::Serialize)]
pub struct Common {
    #[arg(long, default_value_t = 0.25)]
    pub eps: f64,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "practical")]
    pub profile: ProfileArg,
    /// Writes the JSON report and manifest here.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Subcommand)]
pub enum Command {
    /// Generate a graph in edge-list format.
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        m: usize,
        #[arg(long, default_value_t = 32)]
        umax: u64,
        #[arg(long, value_enum, default_value = "eulerian")]
        kind: GenKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Eulerian sparsifier of a directed graph.
    Sparsify {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
        /// Inner-loop length override.
        #[arg(long)]
        tau: Option<usize>,
    },
    /// Graphical spectral sketch.
    Sketch {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "eulerian")]
        mode: SketchMode,
        /// Random test vectors (pairs in Eulerian mode) for the report.
        #[arg(long, default_value_t = 500)]
        vectors: usize,
        #[arg(long)]
        beta: Option<f64>,
    },
    /// Solve vL x = b for an Eulerian graph.
    Solve {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        rhs: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Stationary distribution of a chain given as an edge list of
    /// transition probabilities.
    Stationary {
        #[arg(long)]
        chain: PathBuf,
        #[arg(long, default_value_t = 1e-8)]
        eps: f64,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// ER or expander decomposition, written as JSON.
    Decompose {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "er")]
        kind: DecompKind,
        #[arg(long, default_value_t = 2.0)]
        r: f64,
        #[arg(long)]
        phi_min: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Compare a candidate sparsifier against a reference graph.
    Verify {
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        test: PathBuf,
        #[arg(long, default_value_t = 0.25)]
        eps: f64,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Time fast_sparsify over n = 2^lo .. 2^hi with m = density * n.
    Bench {
        #[arg(long, default_value_t = 8)]
        lo: u32,
        #[arg(long, default_value_t = 13)]
        hi: u32,
        #[arg(long, default_value_t = 8)]
        density: usize,
        #[arg(long, default_value_t = 0.25)]
        eps: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build_global() {
            eprintln!("warning: {e}");
        }
    }
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            println!("{}", e.to_json());
            ExitCode::from(2)
        }
    }
}
