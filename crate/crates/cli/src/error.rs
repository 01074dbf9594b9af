use std::path::PathBuf;

use prosabx_core::abx::AbxError;
use prosabx_core::dsp::DspError;
use prosabx_core::dtw::DtwError;
use prosabx_core::features::FeatureError;
use prosabx_core::manifest::ManifestError;
use prosabx_core::stats::human::HumanError;
use prosabx_core::stats::StatsError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Abx(#[from] AbxError),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Dtw(#[from] DtwError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Human(#[from] HumanError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Invalid(String),
    /// Checks ran but did not pass; details were already reported.
    #[error("validation failed")]
    ValidationFailed,
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
