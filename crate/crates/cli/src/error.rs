use std::fmt;

use tensegrity_core::Error;

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(e) => match e {
                Error::InvalidArgument(_) | Error::InfeasibleTrajectory { .. } => EXIT_USAGE,
                Error::Io { .. }
                | Error::Format { .. }
                | Error::InitializationFailure { .. }
                | Error::UndefinedMetric(_)
                | Error::PlaneNotFound(_) => EXIT_DATA,
                Error::NumericalFailure { .. } | Error::DegenerateGeometry { .. } => EXIT_NUMERICAL,
            },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_follow_the_error_kind() {
        assert_eq!(CliError::Usage("x".into()).exit_code(), EXIT_USAGE);
        assert_eq!(
            CliError::from(Error::InvalidArgument("x".into())).exit_code(),
            EXIT_USAGE
        );
        assert_eq!(
            CliError::from(Error::Format {
                path: "f".into(),
                message: "m".into()
            })
            .exit_code(),
            EXIT_DATA
        );
        assert_eq!(
            CliError::from(Error::InitializationFailure {
                endcap: 0,
                points: 0
            })
            .exit_code(),
            EXIT_DATA
        );
        assert_eq!(
            CliError::from(Error::NumericalFailure {
                context: "c".into(),
                point: vec![]
            })
            .exit_code(),
            EXIT_NUMERICAL
        );
    }
}
