//! Error type shared by every module of the simulator.

use std::fmt;

/// Simulator error. `Config` covers bad arguments, dimension mismatches and
/// malformed input files; `Numeric` covers runtime numeric failures such as
/// degenerate bases or non-finite intermediate values. The CLI maps the two
/// variants to distinct process exit codes (2 and 3).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    Config(String),
    Numeric(String),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::Numeric(msg) => write!(f, "numeric error: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn test_display_prefixes_kind() {
        let c = Error::config("bad m");
        let n = Error::numeric("nan in grid");
        assert_eq!(c.to_string(), "configuration error: bad m");
        assert_eq!(n.to_string(), "numeric error: nan in grid");
    }
}
