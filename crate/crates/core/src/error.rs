use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    /// The Onsager-Machlup metric `1/g1(c)²` is undefined (g1 vanished, or c left the domain).
    #[error("metric singular at c = {c}{}", .t.map(|t| format!(" (t = {t})")).unwrap_or_default())]
    MetricSingular { c: f64, t: Option<f64> },

    #[error("trajectory diverged at t = {t}")]
    Divergence { t: f64 },

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite training loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("dataset retention {fraction:.4} below 1%; widen the velocity box")]
    LowRetention { fraction: f64 },

    #[error("no reachable target; closest endpoint distance {min_distance}")]
    NoReachable { min_distance: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Numerical failures (as opposed to bad input or I/O).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::MetricSingular { .. }
                | Error::Divergence { .. }
                | Error::NoConvergence(_)
                | Error::NonFiniteLoss { .. }
                | Error::LowRetention { .. }
                | Error::NoReachable { .. }
        )
    }
}
