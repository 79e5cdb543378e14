//! Crate-wide error type. Two categories matter operationally: configuration
//! errors (bad input, maps to CLI exit code 2) and numerical failures
//! (instability, singular or indefinite systems, non-convergence; exit code 3).

use std::fmt;

#[derive(Debug, Clone)]
pub enum WaveError {
    /// Invalid scenario/config input.
    Config(String),
    /// Numerical failure during a run (instability, factorization, eigen).
    Numerical(String),
}

impl WaveError {
    pub fn config(msg: impl Into<String>) -> Self {
        WaveError::Config(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        WaveError::Numerical(msg.into())
    }

    /// Process exit code the CLI maps this error to.
    pub fn exit_code(&self) -> i32 {
        match self {
            WaveError::Config(_) => 2,
            WaveError::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for WaveError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WaveError::Config(m) => write!(f, "config error: {m}"),
            WaveError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl std::error::Error for WaveError {}
