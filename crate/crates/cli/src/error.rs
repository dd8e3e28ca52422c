use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),
    #[error(transparent)]
    Core(#[from] rdp_core::Error),
    #[error("{0} self-test check(s) failed")]
    SelftestFailed(usize),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(vec![msg.into()])
    }

    /// Process exit status: 2 configuration, 3 I/O, 4 numeric, 5 self-test.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) if e.is_io() => 3,
            CliError::Core(e) if e.is_numeric() => 4,
            CliError::Core(_) => 2,
            CliError::SelftestFailed(_) => 5,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
