use crate::sim::Counters;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{name} = {value} is outside its domain {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("{name} = {value}: efficiency out of [0,1]")]
    Efficiency { name: &'static str, value: f64 },

    #[error("conditional probability undefined: {0}")]
    UndefinedConditional(&'static str),

    #[error("Fock truncation inadequate: tail mass {tail:e} exceeds {limit:e} (n_max = {n_max})")]
    TruncationInadequate { tail: f64, limit: f64, n_max: usize },

    #[error("scheme {0} has no single switch-efficiency factor")]
    UnsupportedScheme(&'static str),

    #[error("efficiency never falls below half maximum within ±{scan_hz:e} Hz")]
    NoHalfCrossing { scan_hz: f64 },

    #[error("no solution: {0}")]
    NoSolution(String),

    #[error("insufficient statistics: {reason}")]
    InsufficientStatistics {
        reason: &'static str,
        counters: Box<Counters>,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Format(String),
}

impl Error {
    pub(crate) fn domain(name: &'static str, value: f64, domain: &'static str) -> Self {
        Error::Domain {
            name,
            value,
            domain,
        }
    }
}

/// Checks that `value` is a probability/efficiency in `[0, 1]`.
pub(crate) fn check_unit(name: &'static str, value: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(Error::Efficiency { name, value })
    }
}
