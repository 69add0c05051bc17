use std::path::Path;

use crate::error::{Error, Result};
use crate::model::Model;
use crate::tokenizer::{BpeVocab, TokenSequence};

/// A model paired with the tokenizer that produced its vocabulary.
#[derive(Debug, Clone)]
pub struct Engine {
    pub model: Model,
    pub vocab: BpeVocab,
}

impl Engine {
    pub fn new(model: Model, vocab: BpeVocab) -> Result<Self> {
        if vocab.len() > model.config.vocab_size {
            return Err(Error::Config(format!(
                "tokenizer has {} entries but the model only {}",
                vocab.len(),
                model.config.vocab_size
            )));
        }
        Ok(Self { model, vocab })
    }

    pub fn load(
        model_path: impl AsRef<Path>,
        vocab_path: impl AsRef<Path>,
        merges_path: impl AsRef<Path>,
    ) -> Result<Self> {
        let vocab = BpeVocab::load(vocab_path, merges_path)?;
        let model = Model::load(model_path)?;
        Self::new(model, vocab)
    }

    /// Randomly initialized [`ModelConfig::tiny_byte_level`] model with the
    /// byte-level vocabulary.
    pub fn tiny(seed: u64) -> Self {
        let model = Model::random(crate::model::ModelConfig::tiny_byte_level(), seed).expect("valid tiny config");
        Self::new(model, BpeVocab::byte_level()).expect("byte-level vocabulary fits")
    }

    /// Encode with BOS, truncated to the model's context length.
    pub fn encode_prompt(&self, text: &str) -> TokenSequence {
        let mut seq = self.vocab.encode(text, true);
        if seq.len() > self.model.config.max_positions {
            log::warn!(
                "prompt of {} tokens truncated to {}",
                seq.len(),
                self.model.config.max_positions
            );
            seq.ids.truncate(self.model.config.max_positions);
        }
        seq
    }
}
