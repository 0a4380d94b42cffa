use std::fmt;

use serde_json::json;

use aoi_core::{Error, Violation};

#[derive(Debug)]
pub enum CliError {
    /// Malformed JSON or a payload that does not match its kind's schema.
    Parse(String),
    Invalid(Vec<Violation>),
    Core(Error),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Parse(_) | Self::Invalid(_) => 2,
            Self::Io(_) => 1,
            Self::Core(e) => match e {
                Error::Invalid(_) | Error::Domain { .. } | Error::Precondition(_) => 2,
                Error::NoConvergence { .. } | Error::MeanFieldNoConvergence { .. } | Error::Bracket { .. } => 3,
                Error::TooManyCandidates { .. } => 4,
            },
        }
    }

    fn category(&self) -> &'static str {
        match self.exit_code() {
            2 => "validation",
            3 => "non_convergence",
            4 => "resource_guard",
            _ => "io",
        }
    }

    /// Machine-readable form written to stderr on failure.
    pub fn to_json(&self) -> serde_json::Value {
        let violations = match self {
            Self::Invalid(v) | Self::Core(Error::Invalid(v)) => v
                .iter()
                .map(|x| json!({"field": x.field, "message": x.message}))
                .collect(),
            _ => Vec::new(),
        };
        json!({
            "error": {
                "category": self.category(),
                "exit_code": self.exit_code(),
                "message": self.to_string(),
                "violations": violations,
            }
        })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Parse(m) => write!(f, "invalid config: {m}"),
            Self::Invalid(v) => {
                let parts: Vec<String> = v.iter().map(|x| format!("{}: {}", x.field, x.message)).collect();
                write!(f, "invalid config: {}", parts.join("; "))
            }
            Self::Core(e) => write!(f, "{e}"),
            Self::Io(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        Self::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::Io(e.to_string())
    }
}
