use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::arch::TrainedModel;
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

/// A trained model on disk: architecture, hyperparameters, preprocessing
/// and every weight tensor (`{shape, data}`, row-major, full precision),
/// plus the training history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub format_version: u32,
    pub model: TrainedModel,
}

impl ModelArtifact {
    pub fn new(model: TrainedModel) -> Self {
        ModelArtifact {
            format_version: FORMAT_VERSION,
            model,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let artifact: ModelArtifact = serde_json::from_str(&text)
            .map_err(|e| Error::data(format!("{}: not a model artifact: {e}", path.display())))?;
        if artifact.format_version != FORMAT_VERSION {
            return Err(Error::data(format!(
                "{}: format version {} (expected {FORMAT_VERSION})",
                path.display(),
                artifact.format_version
            )));
        }
        Ok(artifact)
    }
}
