//! Command failures and their process exit codes.

use std::fmt;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config or input shape.
    Validation(String),
    Core(ncbayes::Error),
    Io(std::io::Error),
}

impl CliError {
    /// 0 is success; 2 flags bad input; 3 a numerical breakdown; 1 anything else.
    pub fn exit_code(&self) -> i32 {
        use ncbayes::Error as E;
        match self {
            CliError::Validation(_) => 2,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(
                E::InvalidParameter(_)
                | E::Precondition(_)
                | E::OutsideDomain { .. }
                | E::OffsetUndefined { .. }
                | E::DegenerateData(_),
            ) => 2,
            CliError::Core(_) | CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "validation error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ncbayes::Error> for CliError {
    fn from(e: ncbayes::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.into())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}
