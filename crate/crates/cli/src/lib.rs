//! Command-line surface of the two-time distribution library: evaluate `F2`,
//! `F_tt` and the limiting kernels, simulate last-passage times, run the
//! verification suites, compare simulations with `F_tt`, and tabulate the
//! convergence of the rescaled finite kernels.
//!
//! Every command is deterministic given its flags and seed. Exit codes are
//! `0` on success, `1` on usage errors, `2` on numeric failures and `3` when a
//! verification check fails.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use error::{CliError, CliResult};
pub use output::{Format, Table};

/// Top-level flags and the command.
#[derive(Debug, Parser)]
#[command(name = "kpz", version, about = "Two-time distribution of Brownian last-passage percolation", args_override_self = true)]
pub struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Output path (standard output when absent).
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Seed of every random choice.
    #[arg(long, global = true, default_value_t = 2024)]
    pub seed: u64,
    /// Worker-thread cap.
    #[arg(long, global = true, env = "KPZ_THREADS")]
    pub threads: Option<usize>,
    /// Configuration file of `key = value` lines grouped by `[section]`.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Command to run.
    #[command(subcommand)]
    pub command: Command,
}

/// Commands.
#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate the Tracy–Widom distribution F2.
    Tw2(Tw2Args),
    /// Tabulate the two-time distribution F_tt.
    Ftt(FttArgs),
    /// Tabulate the limiting kernels.
    Kernels(KernelArgs),
    /// Sample rescaled last-passage times at two time-like points.
    Simulate(SimulateArgs),
    /// Run a verification suite.
    Verify(VerifyArgs),
    /// Compare an empirical joint CDF (or another F_tt grid) with an F_tt grid.
    Compare(CompareArgs),
    /// Tabulate rescaled finite-kernel errors against their limits.
    Convergence(ConvergenceArgs),
}

/// Macroscopic times and spatial offsets.
#[derive(Debug, Clone, Args)]
pub struct TimeArgs {
    /// First macroscopic time.
    #[arg(long, default_value_t = 1.0)]
    pub t1: f64,
    /// Second macroscopic time.
    #[arg(long, default_value_t = 2.0)]
    pub t2: f64,
    /// Spatial offset at the first time.
    #[arg(long, default_value_t = 0.0)]
    pub nu1: f64,
    /// Spatial offset at the second time.
    #[arg(long, default_value_t = 0.0)]
    pub nu2: f64,
}

/// Flags of `tw2`.
#[derive(Debug, Clone, Args)]
#[command(allow_negative_numbers = true, args_override_self = true)]
pub struct Tw2Args {
    /// First grid point.
    #[arg(long, default_value_t = -5.0)]
    pub from: f64,
    /// Last grid point.
    #[arg(long, default_value_t = 3.0)]
    pub to: f64,
    /// Grid step.
    #[arg(long, default_value_t = 0.5)]
    pub step: f64,
    /// Nyström nodes.
    #[arg(long, default_value_t = 60)]
    pub nodes: usize,
    /// Length of the truncated integration interval.
    #[arg(long, default_value_t = 16.0)]
    pub cutoff: f64,
}

/// Flags of `ftt`.
#[derive(Debug, Clone, Args)]
#[command(allow_negative_numbers = true, args_override_self = true)]
pub struct FttArgs {
    #[command(flatten)]
    pub times: TimeArgs,
    /// First-time levels η₁*, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-1,0,1")]
    pub eta1: Vec<f64>,
    /// Second-time levels η₂, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-1,0,1")]
    pub eta2: Vec<f64>,
    /// Largest shell r + s + t.
    #[arg(long, default_value_t = 2)]
    pub shells: usize,
    /// Gauss nodes in η₁.
    #[arg(long, default_value_t = 24)]
    pub eta_nodes: usize,
    /// Gauss nodes per orthant axis.
    #[arg(long, default_value_t = 24)]
    pub inner_nodes: usize,
    /// Length of the η₁ interval above η₁*.
    #[arg(long, default_value_t = 12.0)]
    pub eta1_cutoff: f64,
}

/// Flags of `kernels`.
#[derive(Debug, Clone, Args)]
#[command(allow_negative_numbers = true, args_override_self = true)]
pub struct KernelArgs {
    #[command(flatten)]
    pub times: TimeArgs,
    /// Fluctuation coordinate at the first time.
    #[arg(long, default_value_t = 0.0)]
    pub eta1: f64,
    /// Fluctuation coordinate at the second time.
    #[arg(long, default_value_t = 0.0)]
    pub eta2: f64,
    /// Kernel arguments x, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-2,-1,0,1,2")]
    pub x: Vec<f64>,
    /// Kernel arguments y, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-2,-1,0,1,2")]
    pub y: Vec<f64>,
    /// Also evaluate the contour forms and their largest deviation.
    #[arg(long)]
    pub dual: bool,
}

/// Update rule of the Brownian dynamic program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    /// Bridge-corrected jumps between grid times.
    Bridge,
    /// Jumps only at grid times.
    Grid,
}

/// Flags of `simulate`.
#[derive(Debug, Clone, Args)]
#[command(allow_negative_numbers = true, args_override_self = true)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub times: TimeArgs,
    /// Scale parameter M.
    #[arg(long, default_value_t = 50.0)]
    pub m: f64,
    /// Number of replicas.
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    /// First replica index.
    #[arg(long, default_value_t = 0)]
    pub first_replica: u64,
    /// Time step (default 1e-3 μ₂).
    #[arg(long)]
    pub dt: Option<f64>,
    /// Update rule.
    #[arg(long, value_enum, default_value_t = SchemeArg::Bridge)]
    pub scheme: SchemeArg,
}

/// Verification suites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    /// Symmetrization, residue and Airy line-integral identities.
    Identities,
    /// Airy and contour forms of the limiting kernels.
    KernelsDual,
    /// Finite-size contour formulas against exhaustive enumeration.
    Prelimit,
    /// Rescaled finite kernels against their limits.
    Convergence,
    /// Every suite.
    All,
}

/// Flags of `verify`.
#[derive(Debug, Clone, Args)]
#[command(args_override_self = true)]
pub struct VerifyArgs {
    /// Suite to run.
    #[arg(value_enum)]
    pub suite: Suite,
    /// Random configurations per identity.
    #[arg(long, default_value_t = 100)]
    pub draws: usize,
    /// Random configurations for the largest double symmetrizations.
    #[arg(long, default_value_t = 3)]
    pub spot_draws: usize,
}

/// Flags of `compare`.
#[derive(Debug, Clone, Args)]
#[command(args_override_self = true)]
pub struct CompareArgs {
    /// F_tt grid written by `ftt`.
    #[arg(long)]
    pub ftt: PathBuf,
    /// Sample dump written by `simulate`, or another F_tt grid.
    #[arg(long)]
    pub reference: PathBuf,
    /// Base tolerance added to three combined standard errors.
    #[arg(long, default_value_t = 0.08)]
    pub base_tol: f64,
}

/// Finite-kernel names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KernelName {
    /// The four-fold kernel a01.
    A01,
    /// The four-fold kernel b1.
    B1,
    /// The two-fold kernel c2.
    C2,
    /// The two-fold kernel c3.
    C3,
}

/// Flags of `convergence`.
#[derive(Debug, Clone, Args)]
#[command(allow_negative_numbers = true, args_override_self = true)]
pub struct ConvergenceArgs {
    #[command(flatten)]
    pub times: TimeArgs,
    /// Fluctuation coordinate at the first time.
    #[arg(long, default_value_t = 0.0)]
    pub eta1: f64,
    /// Fluctuation coordinate at the second time.
    #[arg(long, default_value_t = 0.0)]
    pub eta2: f64,
    /// Kernels, comma separated.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "a01,b1,c2,c3")]
    pub kernels: Vec<KernelName>,
    /// Scales M, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "50,100,200,400")]
    pub m: Vec<f64>,
    /// Kernel argument x.
    #[arg(long, default_value_t = 0.0)]
    pub x: f64,
    /// Kernel argument y.
    #[arg(long, default_value_t = 0.0)]
    pub y: f64,
}

/// Parses `args` (program name first), merging a configuration file when one
/// is given, runs the command and returns the process exit code.
pub fn run(args: Vec<OsString>) -> i32 {
    let args = match config::merge_args(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("{e}");
            return e.exit_code();
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match commands::dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
