//! `bfactory`: exact oracles, simulation and verification from the shell.
//!
//! Exit codes: 0 pass, 1 statistical or verification failure, 2 usage
//! error, 3 resource limit.

mod commands;
mod input;

use std::process::ExitCode;

use bernoulli_factory::FactoryError;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "bfactory", version, about = "Multiparameter Bernoulli factories")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Seed for every random stream.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, global = true, default_value_t = 10_000)]
    pub trials: u64,
    /// Per-trial limit on draws (input flips plus helper draws) when
    /// simulating; default 1000000, 0 for no limit.
    #[arg(long, global = true)]
    pub budget: Option<u64>,
    /// Grid mesh `1/d` for the grid checks.
    #[arg(long, global = true, default_value = "1/16")]
    pub mesh: String,
    #[arg(long, global = true, conflicts_with = "csv")]
    pub json: bool,
    #[arg(long, global = true)]
    pub csv: bool,
}

/// Level schedule and projection radius for the level-mixture factories.
#[derive(Args, Debug, Clone)]
pub struct LevelArgs {
    /// Constant `t` for every level (default 64 for n <= 2, else 16).
    #[arg(long)]
    pub t: Option<u32>,
    /// Per-level `t` values, comma separated; the last one repeats.
    #[arg(long, conflicts_with = "t")]
    pub schedule: Option<String>,
    #[arg(long, default_value_t = 256)]
    pub level_cap: usize,
    /// Projection radius (default `1/(4 n t)`).
    #[arg(long)]
    pub eps: Option<String>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Exact oracle values.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Run a factory repeatedly and compare against its exact target.
    Simulate {
        /// Coin biases: `{"p": [...]}`, a JSON list, `1/2,1/3`, or `@file`.
        #[arg(long)]
        p: String,
        /// A decision tree (JSON, `@file`, or `intro`).
        #[arg(long, conflicts_with = "target")]
        tree: Option<String>,
        /// Built-in name or polynomial JSON / `@file`.
        #[arg(long)]
        target: Option<String>,
        /// Restricts the target to this domain (name, JSON or `@file`).
        #[arg(long)]
        domain: Option<String>,
        #[command(flatten)]
        level: LevelArgs,
        #[arg(long, default_value_t = 0.001)]
        alpha: f64,
    },
    /// Grid checks and exact structural checks.
    #[command(subcommand)]
    Verify(VerifyCommand),
    /// Vertices, facets, fan triangulations and vertex sampling.
    #[command(subcommand)]
    Polytope(PolytopeCommand),
    /// Sampford sampling of k-subsets with inclusion probabilities `p`.
    Sampford {
        #[arg(long)]
        p: String,
        #[arg(long)]
        k: usize,
        #[arg(long, value_enum, default_value_t = SampfordMode::Classic)]
        mode: SampfordMode,
        #[command(flatten)]
        level: LevelArgs,
        #[arg(long, default_value_t = 0.001)]
        alpha: f64,
    },
}

#[derive(Subcommand, Debug)]
pub enum EvalCommand {
    /// Output probability of a finite tree.
    Tree {
        #[arg(long)]
        tree: String,
        #[arg(long)]
        p: String,
    },
    /// `f_k(p)`, `g_k(p)` and the partial sums up to level `k`.
    Level {
        #[arg(long)]
        target: String,
        #[arg(long)]
        p: String,
        #[arg(long, default_value_t = 1)]
        level: usize,
        #[arg(long)]
        domain: Option<String>,
        #[command(flatten)]
        args: LevelArgs,
    },
    /// The vertex weights `f_v(p)` of a polytope.
    Fv {
        #[arg(long)]
        domain: String,
        #[arg(long)]
        p: String,
    },
    /// `g_U`, `f_U` and `fbar_U` for every k-subset.
    Fbar {
        #[arg(long)]
        p: String,
        #[arg(long)]
        k: usize,
    },
}

#[derive(Subcommand, Debug)]
pub enum VerifyCommand {
    /// `f >= c * face_poly^m` on every face where `f` is not identically 0.
    PolyBounded {
        #[arg(long)]
        target: String,
        #[arg(long)]
        c: String,
        #[arg(long)]
        m: u32,
        #[arg(long)]
        domain: Option<String>,
        /// Also check `1 - f`.
        #[arg(long)]
        both: bool,
    },
    /// `min(p,1-p)^m <= f(p) <= 1 - min(p,1-p)^m` for a function of one coin.
    OneDim {
        #[arg(long)]
        target: String,
        #[arg(long)]
        m: u32,
    },
    /// The level inequality at every grid point, for levels `1..=level`.
    Certificate {
        #[arg(long)]
        target: String,
        #[arg(long, default_value_t = 6)]
        level: usize,
        #[arg(long)]
        domain: Option<String>,
        #[command(flatten)]
        args: LevelArgs,
    },
    /// Exhaustive domination check `P[Y in A] <= 2 P[X in A]` for random events.
    Domination {
        #[arg(long)]
        domain: String,
        #[arg(long)]
        t: u32,
        #[arg(long)]
        eps: String,
        #[arg(long)]
        p: String,
        #[arg(long, default_value_t = 50)]
        events: u64,
    },
    /// Coordinate witnesses for every (vertex, facet) pair.
    Witness {
        #[arg(long, conflicts_with = "vertices")]
        domain: Option<String>,
        /// Any vertex list, as a JSON list of points.
        #[arg(long)]
        vertices: Option<String>,
    },
}

#[derive(Subcommand, Debug)]
pub enum PolytopeCommand {
    Vertices {
        #[arg(long)]
        domain: String,
    },
    Facets {
        #[arg(long)]
        domain: String,
    },
    Triangulation {
        #[arg(long)]
        domain: String,
    },
    /// Sample vertices with probabilities `f_v(p)`.
    Sample {
        #[arg(long)]
        domain: String,
        #[arg(long)]
        p: String,
        #[command(flatten)]
        level: LevelArgs,
        #[arg(long, default_value_t = 0.001)]
        alpha: f64,
    },
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampfordMode {
    Classic,
    Boundary,
    /// Incorrect single-pass baseline.
    Naive,
}

/// What a command found, for the exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail,
}

fn exit_code(err: &FactoryError) -> u8 {
    match err {
        FactoryError::Resource(_) => 3,
        FactoryError::CertificateViolation { .. } => 1,
        _ => 2,
    }
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
    match commands::run(&cli) {
        Ok(Verdict::Pass) => ExitCode::SUCCESS,
        Ok(Verdict::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("bfactory: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
