use alloc::string::String;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("inconsistent division: {0}")]
    InconsistentDivision(String),

    /// Rejection sampling of a truncated Gaussian ran out of attempts.
    #[error("degenerate truncation on axis {axis}: no accepted sample after {attempts} attempts")]
    DegenerateTruncation { axis: usize, attempts: usize },

    #[error("numerical failure{}: {message}", unit_suffix(.unit, .step))]
    NumericalFailure {
        message: String,
        /// Block, cluster or batch id when known.
        unit: Option<usize>,
        step: Option<usize>,
    },

    #[error("capacity exceeded: {0}")]
    Capacity(String),
}

fn unit_suffix(unit: &Option<usize>, step: &Option<usize>) -> String {
    use core::fmt::Write;
    let mut s = String::new();
    if let Some(u) = unit {
        let _ = write!(s, " in unit {u}");
    }
    if let Some(t) = step {
        let _ = write!(s, " at step {t}");
    }
    s
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::NumericalFailure {
            message: msg.into(),
            unit: None,
            step: None,
        }
    }

    /// Attaches a unit id to a numerical failure that has none yet.
    pub fn in_unit(self, id: usize) -> Self {
        match self {
            Error::NumericalFailure {
                message,
                unit: None,
                step,
            } => Error::NumericalFailure {
                message,
                unit: Some(id),
                step,
            },
            other => other,
        }
    }
}

pub type Result<T> = core::result::Result<T, Error>;
