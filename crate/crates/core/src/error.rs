use std::path::PathBuf;

use thiserror::Error;

use crate::acquisition::MultipletReading;
use crate::pulselang::ParseError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid value for `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("unknown {kind} `{label}`")]
    UnknownLabel { kind: &'static str, label: String },

    #[error("matrix is not unitary (max deviation {deviation:e})")]
    NotUnitary { deviation: f64 },

    #[error("density matrix invariant violated: {0}")]
    InvariantViolation(String),

    #[error("a gradient is a channel and has no unitary propagator")]
    GradientInPropagator,

    #[error("delay `{0}` cannot be resolved")]
    UnresolvedDelay(String),

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("no preparation sequence exists for input |{a}{b}>")]
    UnsupportedInput { a: u8, b: u8 },

    #[error("reference spectrum carries no signal (magnitude {magnitude:e})")]
    NoReferenceSignal { magnitude: f64 },

    #[error("ambiguous multiplet classification: {}", describe_readings(.readings))]
    Ambiguous { readings: Vec<MultipletReading> },

    #[error("I/O failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },
}

impl Error {
    pub(crate) fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

fn describe_readings(readings: &[MultipletReading]) -> String {
    readings
        .iter()
        .map(|r| format!("spin {} integral {:.3e}", r.spin, r.integral))
        .collect::<Vec<_>>()
        .join(", ")
}
