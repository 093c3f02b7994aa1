//! Versioned JSON checkpoints holding config, vocabularies and weights.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::Seq2SeqModel;
use crate::NeuralError;

pub const FORMAT: &str = "gpsr-seq2seq";
pub const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    model: Seq2SeqModel,
}

pub fn to_json(model: &Seq2SeqModel) -> String {
    serde_json::to_string(&Checkpoint {
        format: FORMAT.into(),
        version: VERSION,
        model: model.clone(),
    })
    .expect("model serializes")
}

pub fn from_json(text: &str) -> Result<Seq2SeqModel, NeuralError> {
    let ck: Checkpoint = serde_json::from_str(text).map_err(|e| NeuralError::Checkpoint(e.to_string()))?;
    if ck.format != FORMAT || ck.version != VERSION {
        return Err(NeuralError::Checkpoint(format!(
            "unsupported checkpoint {} v{} (expected {FORMAT} v{VERSION})",
            ck.format, ck.version
        )));
    }
    Ok(ck.model)
}

pub fn save(model: &Seq2SeqModel, path: &Path) -> Result<(), NeuralError> {
    std::fs::write(path, to_json(model))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Seq2SeqModel, NeuralError> {
    from_json(&std::fs::read_to_string(path)?)
}
