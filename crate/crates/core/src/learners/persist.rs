//! Self-describing model files: a JSON container with a header (format tag,
//! seed, vocabulary content hash, dimension) and the full parameter tables.
//! JSON round-trips f64 exactly, so a loaded model predicts bit-identically
//! to the saved one.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{BatchModel, LinearScorer, OnlineModel};
use crate::vocab::Vocabulary;

const FORMAT: &str = "contextwl-model/1";

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("unsupported model file format {found:?} (expected {FORMAT:?})")]
    Format { found: String },
    #[error("vocabulary hash mismatch: model was trained with {expected}, current vocabulary is {found}")]
    VocabMismatch { expected: String, found: String },
    #[error("malformed model file: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family")]
pub enum SavedModel {
    #[serde(rename = "online")]
    Online { model: OnlineModel },
    #[serde(rename = "batch")]
    Batch { model: BatchModel },
}

impl SavedModel {
    pub fn scorer(&self) -> &dyn LinearScorer {
        match self {
            SavedModel::Online { model } => model,
            SavedModel::Batch { model } => model,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    /// Seed of the run that produced the model, when one applies.
    pub seed: Option<u64>,
    /// Content hash of the vocabulary the feature indices refer to.
    pub vocab_hash: String,
    pub dim: u32,
    pub model: SavedModel,
}

impl ModelFile {
    pub fn new(model: SavedModel, vocab: &Vocabulary, seed: Option<u64>) -> Self {
        let dim = model.scorer().dim();
        ModelFile {
            format: FORMAT.to_string(),
            seed,
            vocab_hash: vocab.content_hash(),
            dim,
            model,
        }
    }
}

pub fn save_model(
    path: impl AsRef<Path>,
    model: &SavedModel,
    vocab: &Vocabulary,
    seed: Option<u64>,
) -> Result<(), PersistError> {
    let file = ModelFile::new(model.clone(), vocab, seed);
    fs::write(path, serde_json::to_string(&file)?)?;
    Ok(())
}

/// Loads a model file without checking it against a vocabulary.
pub fn load_model_unchecked(path: impl AsRef<Path>) -> Result<ModelFile, PersistError> {
    let text = fs::read_to_string(path)?;
    let file: ModelFile = serde_json::from_str(&text)?;
    if file.format != FORMAT {
        return Err(PersistError::Format { found: file.format });
    }
    Ok(file)
}

/// Loads a model and verifies it was trained against `vocab`.
pub fn load_model(path: impl AsRef<Path>, vocab: &Vocabulary) -> Result<SavedModel, PersistError> {
    let file = load_model_unchecked(path)?;
    let found = vocab.content_hash();
    if file.vocab_hash != found {
        return Err(PersistError::VocabMismatch {
            expected: file.vocab_hash,
            found,
        });
    }
    Ok(file.model)
}
