use thiserror::Error;

/// Errors produced by the simulator, its analysis layer and the run harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("axis is not a unit vector (norm {norm})")]
    NonUnitAxis { norm: f64 },

    #[error("learning parameter gamma must lie in (0, 1), got {0}")]
    GammaOutOfRange(f64),

    #[error("reflectivity must lie in [0, 1], got {0}")]
    ReflectivityOutOfRange(f64),

    #[error("correlation undefined: all four counts are zero")]
    UndefinedCorrelation,

    #[error("expectation undefined: total count is zero")]
    UndefinedExpectation,

    #[error("incomplete input: no expectation table for initial state {0}")]
    MissingState(&'static str),

    #[error("fringe fit needs at least {needed} distinct phase points, got {got}")]
    TooFewFringePoints { needed: usize, got: usize },

    #[error("config: {0}")]
    Config(String),

    #[error("config field `{field}`: {reason}")]
    ConfigField { field: String, reason: String },

    #[error("grid point {index}: {source}")]
    GridPoint {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn field(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::ConfigField {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
