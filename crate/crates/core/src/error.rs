use std::fmt;

use thiserror::Error;

/// A single violated parameter bound.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl Violation {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {}", join(.0))]
    Invalid(Vec<Violation>),

    #[error("{what} = {value} is outside [{lo}, {hi}]")]
    Domain {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("{0}")]
    Precondition(String),

    #[error("fixed point not reached after {iterations} iterations (last residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error(
        "mean-field fixed point not reached after {iterations} iterations \
         (delta residual {delta_residual:e}, phi residual {phi_residual:e})"
    )]
    MeanFieldNoConvergence {
        iterations: usize,
        delta_residual: f64,
        phi_residual: f64,
    },

    #[error("no sign change found while expanding the bracket up to {hi}")]
    Bracket { hi: f64 },

    #[error(
        "{candidates:e} candidate price sequences exceed the guard of {limit:e}; \
         reduce the horizon or increase the grid step"
    )]
    TooManyCandidates { candidates: f64, limit: f64 },
}

fn join(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;

/// Collects bound violations so that every bad field is reported at once.
#[derive(Debug, Default)]
pub(crate) struct Checker {
    violations: Vec<Violation>,
}

impl Checker {
    pub fn check(&mut self, ok: bool, field: &str, message: impl Into<String>) {
        if !ok {
            self.violations.push(Violation::new(field, message));
        }
    }

    pub fn finish(self) -> Result<()> {
        if self.violations.is_empty() {
            Ok(())
        } else {
            Err(Error::Invalid(self.violations))
        }
    }
}
