use pacer_core::CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("missing `{key}` in [{section}]{}", if *line > 0 { format!(" (section starts at line {line})") } else { String::new() })]
    Missing { section: &'static str, key: String, line: usize },
    #[error("{0}")]
    Usage(String),
    #[error("{0}: {1}")]
    Io(String, String),
    #[error(transparent)]
    Model(#[from] CoreError),
    #[error("csv: {0}")]
    Csv(String),
    #[error("{file}: missing columns {}", missing.join(", "))]
    Schema { file: String, missing: Vec<String> },
}

impl CliError {
    pub fn parse(line: usize, msg: impl Into<String>) -> Self {
        Self::Parse { line, msg: msg.into() }
    }

    /// Process exit code: 2 for unusable input, 1 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Parse { .. } | Self::Missing { .. } | Self::Schema { .. } | Self::Usage(_) => 2,
            Self::Io(..) | Self::Model(_) | Self::Csv(_) => 1,
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::Csv(e.to_string())
    }
}
