use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("singular Fredholm system for gamma = {gamma:e} (|det| or pivot below threshold)")]
    SingularSystem { gamma: f64 },

    #[error(
        "spectral kernel is not positive semi-definite: min K(omega) = {min_value:e} at omega = {argmin:e}; \
         frequency passes must satisfy lambda_b <= 2 lambda_a"
    )]
    NotPsd { min_value: f64, argmin: f64 },

    #[error("iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("configuration has {} error(s):\n{}", .0.len(), format_issues(.0))]
    Config(Vec<ConfigIssue>),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// A single validation failure, located by a dotted field path such as
/// `constraint.filters[1].lambda_b`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigIssue {
    pub locator: String,
    pub message: String,
}

impl std::fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.locator, self.message)
    }
}

fn format_issues(issues: &[ConfigIssue]) -> String {
    issues
        .iter()
        .map(|i| format!("  {i}"))
        .collect::<Vec<_>>()
        .join("\n")
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        Error::Iteration {
            iteration,
            source: Box::new(self),
        }
    }
}
