use thiserror::Error;

use crate::agent::AgentError;
use crate::config::ConfigError;
use crate::engine::EmbedError;
use crate::federation::FederationError;
use crate::metrics::MetricsError;
use crate::substrate::SubstrateError;
use crate::workload::WorkloadError;

/// Crate-level error. Module errors convert into it with `?`.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Substrate(#[from] SubstrateError),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Federation(#[from] FederationError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// True for errors caused by bad configuration or input rather than a
    /// failure during the run. The CLI maps these to exit code 1.
    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
