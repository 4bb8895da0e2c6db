use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("singular system: pivot {pivot:e} in column {column} is below {threshold:e}")]
    SingularSystem {
        column: usize,
        pivot: f64,
        threshold: f64,
    },

    #[error("root isolation found {found} roots of E_{degree} in (-1, 0), expected {expected}")]
    RootIsolation {
        degree: usize,
        found: usize,
        expected: usize,
    },

    #[error("moment condition for x^{alpha} violated by {residual:e} (tolerance {tolerance:e})")]
    MomentViolation {
        alpha: usize,
        residual: f64,
        tolerance: f64,
    },

    #[error("q = 1 is a pole of the geometric power sum")]
    UnitRatio,

    #[error("unknown test function `{0}`")]
    UnknownFunction(String),

    #[error("test function `{name}` has no Sobolev seminorm of order {m}")]
    MissingSeminorm { name: String, m: usize },
}

impl Error {
    pub(crate) fn parameter(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }
}
