use crate::config::Violation;

#[derive(thiserror::Error, Debug)]
pub enum Error {
    /// A value that must be finite was NaN or infinite.
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    /// The displacement is zero, so no pointing direction is defined.
    #[error("zero displacement: no pointing direction")]
    ZeroDisplacement,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("configuration invalid: {}", format_violations(.0))]
    InvalidConfig(Vec<Violation>),
    #[error("config parse error: {0}")]
    ConfigParse(String),
    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("singular system while fitting polynomial")]
    SingularFit,
    /// An internal consistency rule of the interaction state machine was broken.
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("input script error: {0}")]
    Script(String),
    /// The log was recorded under a different configuration.
    #[error("config mismatch: log has {logged}, replay uses {current}")]
    ConfigMismatch { logged: String, current: String },
    #[error("log format error: {0}")]
    LogFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
