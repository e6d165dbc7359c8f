//! Library side of the `bqt` command: argument types, the compute and sweep
//! commands, and the verification suite.

pub mod args;
pub mod compute;
pub mod sweep;
pub mod verify;

use bqt_core::sdp::SolverOptions;
use bqt_core::BqtError;
use std::fmt;

/// Failure of a command, carrying its exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, bad input files or an unwritable output path (exit 2).
    Usage(String),
    /// The solver failed or stopped short of an optimal point (exit 3).
    Solver(String),
    /// Some verification checks failed (exit 1).
    Checks(Vec<String>),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Checks(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Solver(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Solver(m) => write!(f, "{m}"),
            CliError::Checks(ids) => write!(f, "failed checks: {}", ids.join(", ")),
        }
    }
}

impl std::error::Error for CliError {}

impl From<BqtError> for CliError {
    fn from(e: BqtError) -> Self {
        match e {
            BqtError::Numerical(_) | BqtError::Solver(_) => CliError::Solver(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub const SOLVER_OPTS_ENV: &str = "BQT_SOLVER_OPTS";

/// Solver options from `BQT_SOLVER_OPTS` (a JSON object or a path to one),
/// then the command-line overrides.
pub fn solver_options(s: &args::SolverArgs) -> CliResult<SolverOptions> {
    let mut opts = match std::env::var(SOLVER_OPTS_ENV) {
        Ok(v) if v.trim_start().starts_with('{') => {
            serde_json::from_str(&v).map_err(|e| CliError::Usage(format!("{SOLVER_OPTS_ENV}: {e}")))?
        }
        Ok(v) if !v.trim().is_empty() => SolverOptions::from_file(std::path::Path::new(v.trim()))?,
        _ => SolverOptions::default(),
    };
    if let Some(v) = s.feas_tol {
        opts.feas_tol = v;
    }
    if let Some(v) = s.gap_tol {
        opts.gap_tol = v;
    }
    if let Some(v) = s.max_iters {
        opts.max_iters = v;
    }
    if let Some(v) = s.ambient_cap {
        opts.ambient_cap = v;
    }
    if s.verbose {
        opts.verbosity = 1;
    }
    if opts.max_iters == 0 || !(opts.feas_tol > 0.0) || !(opts.gap_tol > 0.0) {
        return Err(CliError::Usage("solver tolerances and iteration limit must be positive".into()));
    }
    Ok(opts)
}

/// Prints a line to stdout; a closed pipe (as in `bqt ... | head`) is not an error.
pub fn emit(text: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}
