use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::MlpMaxPool;
use super::train::{Regularizer, TrainConfig, TrainOutcome};
use crate::corpus::Vocabulary;
use crate::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

/// Everything needed to run a trained model on new documents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub labels: Vec<String>,
    pub vocab: Vocabulary,
    pub config: TrainConfig,
    pub regularizer: Regularizer,
    pub model: MlpMaxPool,
}

impl Checkpoint {
    pub fn from_outcome(outcome: &TrainOutcome, config: &TrainConfig, regularizer: Regularizer) -> Self {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            labels: outcome.labels.clone(),
            vocab: outcome.vocab.clone(),
            config: config.clone(),
            regularizer,
            model: outcome.model.clone(),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        let version = value.get("version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Version(version));
        }
        Ok(serde_json::from_value(value)?)
    }
}
