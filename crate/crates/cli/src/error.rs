use std::fmt;
use std::process::ExitCode;

/// Failure classes mapped onto the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad invocation or configuration (exit 2).
    Usage(String),
    /// Failure after the configuration was accepted (exit 3).
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) => ExitCode::from(2),
            CliError::Runtime(_) => ExitCode::from(3),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

/// Core errors raised while assembling a model are configuration problems.
pub fn usage(e: moran_assort::Error) -> CliError {
    CliError::Usage(e.to_string())
}

/// Rejections of the request map to exit 2, failures while running to exit 3.
pub fn core(e: moran_assort::Error) -> CliError {
    match e {
        moran_assort::Error::Infeasible(_) => CliError::Runtime(e.to_string()),
        _ => CliError::Usage(e.to_string()),
    }
}

pub fn runtime(e: impl fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

pub type CliResult<T> = Result<T, CliError>;
