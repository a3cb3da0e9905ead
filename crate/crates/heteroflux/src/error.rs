use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Both effective mobilities vanished at the evaluation point.
    #[error("degenerate mobility: lambda1 + lambda2 = {sum:.3e} at S = {s}")]
    DegenerateMobility { s: f64, sum: f64 },

    /// The sampled flux profile shows more than one interior local maximum.
    #[error("flux is not unimodal: {0} interior descent-to-ascent transitions")]
    NotUnimodal(usize),

    /// A mobility curve violates one of its structural invariants.
    #[error("invalid mobility curve: {0}")]
    InvalidCurve(String),

    /// Initial data outside [0,1] or otherwise malformed.
    #[error("invalid data: {0}")]
    InvalidData(String),

    /// lambda * M > 1 for the selected scheme.
    #[error("CFL violation for scheme {scheme}: lambda = {lambda} but M = {m:.6} requires lambda <= {max_lambda:.6}")]
    CflViolation {
        scheme: String,
        lambda: f64,
        m: f64,
        max_lambda: f64,
    },

    /// A cell left [0,1] by more than the roundoff allowance. Indicates a bug
    /// in a flux or a violated CFL bound, never clamped silently.
    #[error("bounds violation at step {step}, cell j = {j}: S = {value:.17}")]
    BoundsViolation { step: usize, j: i64, value: f64 },

    /// Root-finding for an entropy trace failed: the target flux value lies
    /// outside the range of the admissible branch.
    #[error("no admissible trace: {0}")]
    NoAdmissibleTrace(String),

    /// CLI / model-file configuration error.
    #[error("config error{}: {msg}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Config { line: Option<usize>, msg: String },

    #[error("unknown experiment id {0} (valid: 1..=5)")]
    UnknownExperiment(u8),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config {
            line: None,
            msg: msg.into(),
        }
    }

    pub fn config_at(line: usize, msg: impl Into<String>) -> Self {
        Error::Config {
            line: Some(line),
            msg: msg.into(),
        }
    }

    /// Process exit code for the CLI front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::UnknownExperiment(_) | Error::InvalidData(_) => 2,
            Error::CflViolation { .. } => 3,
            Error::BoundsViolation { .. } => 4,
            Error::Io(_) => 5,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
