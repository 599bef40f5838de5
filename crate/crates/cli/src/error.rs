use thiserror::Error;

/// Front-end failure. [`CliError::exit_code`] gives the process status:
/// 1 usage, 2 data, 3 numeric, 4 I/O.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Engine(#[from] mapseg::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Engine(e) => match e {
                mapseg::Error::Argument(_) | mapseg::Error::Config(_) => 1,
                mapseg::Error::Data(_) | mapseg::Error::Decode { .. } | mapseg::Error::Shape(_) | mapseg::Error::State(_) => 2,
                mapseg::Error::Numeric(_) => 3,
                mapseg::Error::Io { .. } => 4,
            },
        }
    }

    pub fn category(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Engine(e) => e.category(),
        }
    }

    pub fn message(&self) -> String {
        match self {
            CliError::Usage(m) => m.clone(),
            CliError::Engine(e) => e.to_string(),
        }
    }

    /// Single-line report: `error: <category>: <message>`.
    pub fn report_line(&self) -> String {
        format!("error: {}: {}", self.category(), self.message().replace(['\n', '\r'], " "))
    }
}
