use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error("stall: {0}")]
    Stall(String),

    #[error("inequality violation: {0}")]
    Violation(String),

    #[error("construction infeasible: {0}")]
    Infeasible(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Stall(_) => 3,
            CliError::Violation(_) => 4,
            CliError::Infeasible(_) => 5,
            CliError::Io(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Stall(_) => "stall",
            CliError::Violation(_) => "inequality_violation",
            CliError::Infeasible(_) => "construction_infeasible",
            CliError::Io(_) => "io",
        }
    }
}
