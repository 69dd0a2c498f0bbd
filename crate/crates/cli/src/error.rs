use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Parse(String),

    #[error("{0}")]
    Validation(String),

    #[error("{0}")]
    Numerical(String),

    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Numerical(_) | CliError::Io(_) => 3,
        }
    }
}

impl From<saddle_core::Error> for CliError {
    fn from(e: saddle_core::Error) -> Self {
        use saddle_core::Error as E;
        match e {
            E::InvalidParams(_)
            | E::DegenerateDelta { .. }
            | E::InvalidDomain(_)
            | E::InvalidArgument(_)
            | E::SeedRequired
            | E::BetaOutOfRange(_) => CliError::Validation(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
