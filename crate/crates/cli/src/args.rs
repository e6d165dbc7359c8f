use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;

#[derive(Parser, Debug)]
#[command(name = "bqt", version, about = "PPT simulation error of bidirectional teleportation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Compute one simulation error and print the report as JSON.
    Compute(ComputeArgs),
    /// Evaluate a parameter grid and write CSV.
    Sweep(SweepArgs),
    /// Run the verification checks.
    Verify(VerifyArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Resource {
    None,
    Isotropic,
    Werner,
    Gadc,
    Custom,
    /// The single-ebit KPF16 protocol family (parameters p1, p2).
    Kpf16,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum MethodArg {
    Analytic,
    Lp,
    Sdp,
    All,
}

#[derive(Args, Debug, Clone, Default)]
pub struct SolverArgs {
    #[arg(long)]
    pub feas_tol: Option<f64>,
    #[arg(long)]
    pub gap_tol: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Largest accepted real parameter count of one matrix variable.
    #[arg(long)]
    pub ambient_cap: Option<usize>,
    /// Print one line per solver iteration to stderr.
    #[arg(long)]
    pub verbose: bool,
}

#[derive(Args, Debug)]
pub struct ComputeArgs {
    #[arg(long, value_enum)]
    pub resource: Resource,
    #[arg(long = "F")]
    pub f: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long = "N")]
    pub n: Option<f64>,
    #[arg(long = "dA")]
    pub da: Option<usize>,
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    #[arg(long)]
    pub p1: Option<f64>,
    #[arg(long)]
    pub p2: Option<f64>,
    /// Resource state as {"dims": [dA, dB], "re": [[..]], "im": [[..]]}.
    #[arg(long)]
    pub file: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "all")]
    pub method: MethodArg,
    /// Also write the JSON to this path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

/// Axis values are a single number or `start:stop:steps`.
#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub resource: Resource,
    #[arg(long = "F")]
    pub f: Option<String>,
    #[arg(long)]
    pub p: Option<String>,
    #[arg(long)]
    pub gamma: Option<String>,
    #[arg(long = "N")]
    pub n: Option<String>,
    #[arg(long = "dA")]
    pub da: Option<String>,
    #[arg(long)]
    pub d: Option<String>,
    #[arg(long)]
    pub p1: Option<String>,
    #[arg(long)]
    pub p2: Option<String>,
    #[arg(long, value_enum, default_value = "all")]
    pub method: MethodArg,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: available cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Run only these checks (repeatable or comma separated).
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<String>,
    /// Print the available check ids and exit.
    #[arg(long)]
    pub list: bool,
    /// Print a JSON summary instead of text lines.
    #[arg(long)]
    pub json: bool,
    #[command(flatten)]
    pub solver: SolverArgs,
}
