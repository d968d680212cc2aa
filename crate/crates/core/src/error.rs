use alloc::string::String;

/// Errors raised by the core library.
///
/// The variants mirror the failure classes the command line maps onto exit
/// codes: configuration problems, domain violations, numerical breakdowns and
/// estimation failures.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite value at path {path}, step {step}: {what}")]
    NonFinite {
        path: usize,
        step: usize,
        what: String,
    },

    #[error("estimation error: {message} (effective sample {effective_sample:.1}, required {required})")]
    Estimation {
        message: String,
        effective_sample: f64,
        required: usize,
    },

    #[error("singular gauge transform at path {path}, step {step}")]
    SingularTransform { path: usize, step: usize },

    #[error("singular portfolio deflator at path {path}, step {step}")]
    SingularPortfolio { path: usize, step: usize },

    #[error("numeraire deflator not strictly positive at path {path}, step {step}")]
    Numeraire { path: usize, step: usize },

    #[error("portfolio volatility vanishes at times {times:?}")]
    SingularSharpe { times: alloc::vec::Vec<f64> },

    #[error("no default intensity available: {0}")]
    MissingIntensity(String),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn estimation(msg: impl Into<String>, effective_sample: f64, required: usize) -> Self {
        Error::Estimation {
            message: msg.into(),
            effective_sample,
            required,
        }
    }

    /// True for errors caused by the inputs rather than by the numerics.
    pub fn is_configuration(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Domain(_) | Error::MissingIntensity(_)
        )
    }
}

pub type Result<T> = core::result::Result<T, Error>;
