use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A market instance, prior set or uncertainty set failed validation.
    #[error("invalid input: {0}")]
    Invalid(String),

    /// The inner maximisation of a numeric conjugate could not be bracketed.
    #[error(
        "conjugate bracket failed at y = {y:e}: bracket [{lower:e}, {upper:e}], marginal utility at upper end {marginal:e}"
    )]
    Bracket {
        y: f64,
        lower: f64,
        upper: f64,
        marginal: f64,
    },

    #[error("linear program {0}")]
    Lp(#[from] crate::numerics::lp::LpError),

    #[error("solver failure: {0}")]
    Solver(String),

    /// The robust primal value is not finite on the given instance.
    #[error("primal value unbounded: {0}")]
    Unbounded(String),

    /// Monte Carlo estimate refused because its variance is not usable.
    #[error("monte carlo refused: {0}")]
    MonteCarlo(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("toml: {0}")]
    Toml(#[from] toml::de::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn solver(msg: impl Into<String>) -> Self {
        Error::Solver(msg.into())
    }
}
