use std::fmt;

/// Failure of a command, carrying its exit code.
#[derive(Debug)]
pub enum CliError {
    /// Invalid configuration, arguments or input files (exit 2).
    Config(String),
    /// The computation itself failed (exit 3).
    Numerical(entropic::Error),
    /// One or more checks did not pass (exit 1).
    Verification(Vec<String>),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Verification(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numerical(e) => write!(f, "numerical abort: {e}"),
            CliError::Verification(names) => write!(f, "verification failed: {}", names.join(", ")),
        }
    }
}

impl From<entropic::Error> for CliError {
    fn from(e: entropic::Error) -> Self {
        use entropic::Error as E;
        match e {
            E::InvalidGrid(_)
            | E::GridMismatch(_)
            | E::InvalidParameter { .. }
            | E::SplitStepNeedsPeriodic
            | E::ScheduleMismatch(_)
            | E::Superluminal { .. } => CliError::Config(e.to_string()),
            _ => CliError::Numerical(e),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(format!("i/o: {e}"))
    }
}
