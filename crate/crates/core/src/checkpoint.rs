//! Versioned JSON model containers.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Container {
    format_version: u32,
    model_kind: String,
    vocab_hash: String,
    model: serde_json::Value,
}

/// Models that can be written to and read from a checkpoint.
pub trait Checkpoint: Serialize + DeserializeOwned {
    /// Tag stored in the container and checked on load.
    fn model_kind(&self) -> String;
}

pub fn to_checkpoint_string<M: Checkpoint>(model: &M, vocab_hash: &str) -> Result<String> {
    let c = Container {
        format_version: FORMAT_VERSION,
        model_kind: model.model_kind(),
        vocab_hash: vocab_hash.to_string(),
        model: serde_json::to_value(model)?,
    };
    Ok(serde_json::to_string(&c)?)
}

/// Parses a checkpoint, rejecting other format versions and any vocabulary
/// hash other than `vocab_hash`.
pub fn from_checkpoint_str<M: Checkpoint>(text: &str, vocab_hash: &str) -> Result<M> {
    let c: Container = serde_json::from_str(text)?;
    if c.format_version != FORMAT_VERSION {
        return Err(Error::data(format!(
            "checkpoint format {} is not supported (expected {FORMAT_VERSION})",
            c.format_version
        )));
    }
    if c.vocab_hash != vocab_hash {
        return Err(Error::data(format!(
            "checkpoint vocabulary {} does not match {vocab_hash}",
            c.vocab_hash
        )));
    }
    let model: M = serde_json::from_value(c.model)?;
    if model.model_kind() != c.model_kind {
        return Err(Error::data(format!(
            "checkpoint holds a {} model, not {}",
            c.model_kind,
            model.model_kind()
        )));
    }
    Ok(model)
}

pub fn save_checkpoint<M: Checkpoint>(path: impl AsRef<Path>, model: &M, vocab_hash: &str) -> Result<()> {
    fs::write(path, to_checkpoint_string(model, vocab_hash)?)?;
    Ok(())
}

pub fn load_checkpoint<M: Checkpoint>(path: impl AsRef<Path>, vocab_hash: &str) -> Result<M> {
    from_checkpoint_str(&fs::read_to_string(path)?, vocab_hash)
}
