use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("degenerate triangle {index}: signed area {area:e}")]
    DegenerateElement { index: usize, area: f64 },

    #[error("linear solver failure: {0}")]
    Solver(String),

    #[error("requested rank {requested} exceeds the numerical rank {rank} of the snapshot matrix")]
    RankExceeded { requested: usize, rank: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error(
        "least-squares data matrix is rank deficient ({rank} < {required}) with lambda = 0; \
         use a positive regularization weight"
    )]
    RankDeficientRegression { rank: usize, required: usize },

    #[error("reduced step matrix (I - dt*K) is singular for dt = {dt}: {hint}")]
    SingularReducedStep { dt: f64, hint: String },

    #[error("Schwarz iteration did not converge within {max_sweeps} sweeps at t = {time} (last eps_abs = {last_abs:e}, eps_rel = {last_rel:e})")]
    NonConvergence {
        time: f64,
        max_sweeps: usize,
        last_abs: f64,
        last_rel: f64,
        /// (eps_abs, eps_rel) for every executed sweep.
        history: Vec<(f64, f64)>,
    },

    #[error("zero-norm data: {0}")]
    ZeroNorm(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Process exit code used by the command-line harness.
    ///
    /// 1 configuration/argument problems, 2 numerical failures, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) | Error::Config(_) => 1,
            Error::Io { .. } | Error::Format { .. } => 3,
            Error::DegenerateElement { .. }
            | Error::Solver(_)
            | Error::RankExceeded { .. }
            | Error::InsufficientData(_)
            | Error::RankDeficientRegression { .. }
            | Error::SingularReducedStep { .. }
            | Error::NonConvergence { .. }
            | Error::ZeroNorm(_)
            | Error::Invariant(_) => 2,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
