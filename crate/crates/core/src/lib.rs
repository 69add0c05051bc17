//! Transformer inference with residual-stream capture and injection, and
//! the activation-addition (ActAdd) steering toolkit built on top of it.
//!
//! Module map:
//!
//! - [`tokenizer`]: GPT-2 byte-level BPE.
//! - [`model`]: the forward pass, hooks and the AAWF weight loader.
//! - [`sampler`]: seeded temperature / nucleus / frequency-penalty sampling.
//! - [`steering`]: contrast-pair steering vectors and their controls.
//! - [`corpus`]: document ingestion, sentence splitting and topic binning.
//! - [`eval`]: perplexity ratios, logprob shifts, P@K, KL and timing.

pub mod aawf;
pub mod corpus;
pub mod engine;
pub mod eval;
pub mod error;
pub mod model;
pub mod sampler;
pub mod steering;
pub mod tensor;
pub mod tokenizer;

pub use engine::Engine;
pub use error::{Error, Result};
pub use model::{ForwardResult, HookSet, Injection, Model, ModelConfig, ResidualSnapshot};
pub use sampler::{Completion, GenerationParams};
pub use steering::{ContrastPair, SteeringSpec, SteeringVector};
pub use tensor::Matrix;
pub use tokenizer::{BpeVocab, TokenSequence};
