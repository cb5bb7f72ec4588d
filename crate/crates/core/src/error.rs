use thiserror::Error;

/// Errors raised by the simulator and its harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("time reversal: state is at {from} s, requested {to} s")]
    TimeReversal { from: f64, to: f64 },

    #[error("infinite time constant: bias current is zero")]
    InfiniteTimeConstant,

    #[error("malformed event: {0}")]
    MalformedEvent(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("numeric fault in {entity} at t = {time} s: {detail}")]
    NumericFault {
        entity: String,
        time: f64,
        detail: String,
    },

    #[error("config error{}: {msg}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Config { line: Option<usize>, msg: String },

    #[error("io error: {0}")]
    Io(String),

    #[error("assertion failed: {0}")]
    Assertion(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config {
            line: None,
            msg: msg.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
