use thiserror::Error;

use crate::io::config::ConfigError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point is not on the boundary (signed distance {distance:e})")]
    NotOnBoundary { distance: f64 },

    #[error("operation `{op}` is not supported for {geometry} geometry")]
    UnsupportedGeometry { op: &'static str, geometry: &'static str },

    #[error("degenerate point: {0}")]
    DegeneratePoint(String),

    #[error("density of particle {particle} is not positive at the evaluation point (value {value:e})")]
    ZeroDensity { particle: usize, value: f64 },

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("{} at distance {distance:e} is below the cutoff radius {r_min:e}", describe_pair(.pair))]
    BelowCutoff {
        pair: Option<(usize, usize)>,
        distance: f64,
        r_min: f64,
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("ensemble is empty")]
    EmptyEnsemble,

    #[error("trajectory carries no Brownian increments; simulate with girsanov = reweight")]
    MissingIncrements,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("simulation failed at t = {time}: {source}")]
    StepFailed {
        time: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("configuration rejected:\n{}", format_config_errors(.0))]
    Config(Vec<ConfigError>),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Strips `StepFailed` wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::StepFailed { source, .. } => source.root(),
            other => other,
        }
    }

    /// Process exit status for this error: 2 for configuration problems,
    /// 1 for I/O, 3 for failures of the numerics.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::Config(_) | Error::InvalidInput(_) => 2,
            Error::Io(_) | Error::Json(_) => 1,
            _ => 3,
        }
    }
}

fn describe_pair(pair: &Option<(usize, usize)>) -> String {
    match pair {
        Some((i, j)) => format!("pair ({i}, {j})"),
        None => "separation".to_string(),
    }
}

fn format_config_errors(errors: &[ConfigError]) -> String {
    errors
        .iter()
        .map(|e| format!("  {e}"))
        .collect::<Vec<_>>()
        .join("\n")
}
