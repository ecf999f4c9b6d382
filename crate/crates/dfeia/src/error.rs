use std::path::PathBuf;

use thiserror::Error;

use crate::weights::WeightsError;

#[derive(Debug, Error)]
pub enum DfeiaError {
    #[error(transparent)]
    Core(#[from] dfeia_core::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: {source}", path.display())]
    Weights { path: PathBuf, source: WeightsError },
    #[error("{}: invalid config: {source}", path.display())]
    ConfigParse { path: PathBuf, source: serde_json::Error },
    #[error("{}: {source}", path.display())]
    ConfigInvalid { path: PathBuf, source: dfeia_core::Error },
    #[error("{}: cannot decode image: {source}", path.display())]
    Decode { path: PathBuf, source: image::ImageError },
    #[error("{}: {message}", path.display())]
    Dataset { path: PathBuf, message: String },
}

pub type Result<T, E = DfeiaError> = std::result::Result<T, E>;

impl DfeiaError {
    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| Self::Io { path, source }
    }

    pub(crate) fn dataset(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Self::Dataset { path: path.into(), message: message.into() }
    }
}
