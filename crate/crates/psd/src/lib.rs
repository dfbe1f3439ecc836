//! Config files, prime caches, CSV and JSON reports, and the staged run
//! pipeline behind the `psd` command.

use std::path::Path;

use thiserror::Error;

pub mod cache;
pub mod config;
pub mod pipeline;
pub mod report;

pub use cache::CacheError;
pub use config::{ConfigError, HypothesisError, Instance, RawConfig};

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_HYPOTHESIS: u8 = 3;
pub const EXIT_NUMERIC: u8 = 4;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Hypothesis(#[from] HypothesisError),
    #[error(transparent)]
    Core(#[from] psd_core::Error),
    #[error(transparent)]
    Cache(CacheError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{0}")]
    Check(String),
}

impl From<CacheError> for RunError {
    fn from(e: CacheError) -> Self {
        match e {
            CacheError::Core(c) => Self::Core(c),
            other => Self::Cache(other),
        }
    }
}

impl RunError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io { path: path.display().to_string(), source }
    }

    /// 2 for config and usage errors, 3 for hypothesis violations, 4 for
    /// numeric failures, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        use psd_core::Error as E;
        match self {
            Self::Config(_) | Self::Usage(_) => EXIT_CONFIG,
            Self::Hypothesis(_) => EXIT_HYPOTHESIS,
            Self::Core(E::NoConvergence { .. } | E::PrecisionExhausted(_) | E::VerificationFailed(_)) => EXIT_NUMERIC,
            Self::Core(
                E::GammaOutOfRange(_)
                | E::Q0TooSmall(_)
                | E::Lambda0OutOfRange(_)
                | E::ScaleOutOfRange(_)
                | E::EpsilonOutOfRange(_)
                | E::DeltaNotBelowH { .. }
                | E::OutsideBand { .. },
            ) => EXIT_HYPOTHESIS,
            Self::Core(_) | Self::Cache(_) | Self::Io { .. } | Self::Check(_) => EXIT_FAILURE,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(RunError::Config(ConfigError::MissingKey("q0")).exit_code(), 2);
        assert_eq!(RunError::Hypothesis(HypothesisError { violations: vec![] }).exit_code(), 3);
        assert_eq!(RunError::Core(psd_core::Error::NoConvergence { panels: 8 }).exit_code(), 4);
        assert_eq!(RunError::Core(psd_core::Error::DeltaNotBelowH { delta: 1.0, h: 0.5 }).exit_code(), 3);
        assert_eq!(RunError::Check("x".into()).exit_code(), 1);
    }
}
