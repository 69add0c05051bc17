//! Seeded autoregressive sampling.
//!
//! Per step: subtract `frequency_penalty × count` from the raw logits of
//! tokens already generated, divide by temperature, softmax, keep the
//! smallest descending-probability prefix whose mass reaches `top_p`
//! (ties ordered by token id), renormalize and draw by inverse CDF.
//!
//! The PRNG is xoshiro256++ whose 256-bit state is filled by splitmix64
//! from a 64-bit seed; uniforms are `(next_u64 >> 11) · 2⁻⁵³`. Completion
//! `i` of a batch seeded with `s` uses seed `s + i` (wrapping).

use std::collections::HashMap;

use rand::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::Engine;
use crate::error::{Error, Result};
use crate::steering::{SteeringSpec, SteeringVector};
use crate::tensor;
use crate::tokenizer::TokenSequence;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationParams {
    pub temperature: f64,
    pub top_p: f64,
    pub frequency_penalty: f64,
    pub max_new_tokens: usize,
    pub seed: u64,
}

impl Default for GenerationParams {
    /// The generation-scoring settings: T = 1, top-p 0.3, frequency
    /// penalty 1, 40 new tokens, seed 0.
    fn default() -> Self {
        Self {
            temperature: 1.0,
            top_p: 0.3,
            frequency_penalty: 1.0,
            max_new_tokens: 40,
            seed: 0,
        }
    }
}

impl GenerationParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::Validation(format!(
                "temperature must be > 0, got {}",
                self.temperature
            )));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(Error::Validation(format!("top_p must be in (0, 1], got {}", self.top_p)));
        }
        if !(self.frequency_penalty >= 0.0 && self.frequency_penalty.is_finite()) {
            return Err(Error::Validation(format!(
                "frequency_penalty must be >= 0, got {}",
                self.frequency_penalty
            )));
        }
        Ok(())
    }
}

/// Seeded generator for one completion.
pub struct SamplerRng(Xoshiro256PlusPlus);

impl SamplerRng {
    pub fn new(seed: u64) -> Self {
        Self(Xoshiro256PlusPlus::seed_from_u64(seed))
    }

    /// Stream for completion `index` of a batch seeded with `seed`.
    pub fn for_completion(seed: u64, index: u64) -> Self {
        Self::new(seed.wrapping_add(index))
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }
}

/// Raw logits minus the frequency penalty, divided by temperature.
pub fn adjusted_logits(logits: &[f32], history: &HashMap<u32, u32>, params: &GenerationParams) -> Vec<f64> {
    let mut out: Vec<f64> = logits.iter().map(|&v| f64::from(v)).collect();
    if params.frequency_penalty != 0.0 {
        for (&token, &count) in history {
            if let Some(v) = out.get_mut(token as usize) {
                *v -= params.frequency_penalty * f64::from(count);
            }
        }
    }
    if params.temperature != 1.0 {
        for v in &mut out {
            *v /= params.temperature;
        }
    }
    out
}

fn softmax_f64(x: &[f64]) -> Vec<f64> {
    let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = x.iter().map(|&v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Nucleus filter: `(token, renormalized probability)` in descending
/// probability order, ties by ascending id. Never empty.
pub fn nucleus(probs: &[f64], top_p: f64) -> Vec<(u32, f64)> {
    let mut order: Vec<u32> = (0..probs.len() as u32).collect();
    // Stable sort keeps ascending ids among equal probabilities.
    order.sort_by(|&a, &b| probs[b as usize].total_cmp(&probs[a as usize]));
    let mut kept = Vec::new();
    let mut mass = 0.0;
    for id in order {
        let p = probs[id as usize];
        kept.push((id, p));
        mass += p;
        if mass >= top_p {
            break;
        }
    }
    let total: f64 = kept.iter().map(|(_, p)| p).sum();
    for (_, p) in &mut kept {
        *p /= total;
    }
    kept
}

/// Draw the next token from one logits row.
pub fn sample_next(
    logits_row: &[f32],
    history: &HashMap<u32, u32>,
    params: &GenerationParams,
    rng: &mut SamplerRng,
) -> u32 {
    let probs = softmax_f64(&adjusted_logits(logits_row, history, params));
    let kept = nucleus(&probs, params.top_p);
    let u = rng.next_f64();
    let mut cumulative = 0.0;
    for &(id, p) in &kept {
        cumulative += p;
        if u < cumulative {
            return id;
        }
    }
    kept.last().expect("nucleus keeps at least one token").0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub prompt: TokenSequence,
    pub generated: TokenSequence,
    pub text: String,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steering: Option<SteeringSpec>,
}

/// Generate one completion; builds the steering vector when a spec is given.
pub fn generate(
    engine: &Engine,
    prompt: &str,
    params: &GenerationParams,
    steering: Option<&SteeringSpec>,
) -> Result<Completion> {
    let vector = steering
        .map(|spec| crate::steering::build_steering_vector(engine, spec))
        .transpose()?;
    let mut c = generate_with_vector(engine, prompt, params, vector.as_ref(), params.seed)?;
    c.steering = steering.cloned();
    Ok(c)
}

/// Generate one completion with an already-built vector and explicit seed.
///
/// The vector's rows are injected at fixed prompt positions on every
/// forward pass; generated positions are never modified.
pub fn generate_with_vector(
    engine: &Engine,
    prompt: &str,
    params: &GenerationParams,
    vector: Option<&SteeringVector>,
    seed: u64,
) -> Result<Completion> {
    params.validate()?;
    let prompt_seq = engine.encode_prompt(prompt);
    if prompt_seq.len() < 2 {
        return Err(Error::Validation("prompt is empty".into()));
    }
    let injections: Vec<_> = match vector {
        Some(v) => {
            v.check_model(&engine.model.config)?;
            if v.touches_last_position(prompt_seq.len()) {
                log::warn!("steering vector reaches the final prompt position; expect broken syntax");
            }
            v.injection(prompt_seq.len()).into_iter().collect()
        }
        None => Vec::new(),
    };

    let eot = engine.vocab.end_of_text();
    let max_positions = engine.model.config.max_positions;
    let mut rng = SamplerRng::new(seed);
    let mut session = engine.model.session();
    let mut logits = session.extend(&prompt_seq.ids, &injections)?;
    let mut history: HashMap<u32, u32> = HashMap::new();
    let mut generated = Vec::with_capacity(params.max_new_tokens);
    while generated.len() < params.max_new_tokens {
        let token = sample_next(&logits, &history, params, &mut rng);
        if token == eot {
            break;
        }
        generated.push(token);
        *history.entry(token).or_insert(0) += 1;
        if generated.len() == params.max_new_tokens || session.len() >= max_positions {
            break;
        }
        logits = session.extend(&[token], &injections)?;
    }
    let text = engine.vocab.decode_display(&generated)?;
    Ok(Completion {
        prompt: prompt_seq,
        generated: TokenSequence::new(generated, false),
        text,
        seed,
        steering: None,
    })
}

/// `n` independent completions in seed order (`seed + i`), run in parallel.
pub fn generate_batch(
    engine: &Engine,
    prompt: &str,
    params: &GenerationParams,
    vector: Option<&SteeringVector>,
    n: usize,
) -> Result<Vec<Completion>> {
    (0..n as u64)
        .into_par_iter()
        .map(|i| generate_with_vector(engine, prompt, params, vector, params.seed.wrapping_add(i)))
        .collect()
}

/// Probability of each token after the full pipeline (used by tests and
/// diagnostics).
pub fn sampling_distribution(logits_row: &[f32], history: &HashMap<u32, u32>, params: &GenerationParams) -> Vec<f64> {
    let probs = softmax_f64(&adjusted_logits(logits_row, history, params));
    let mut out = vec![0.0; probs.len()];
    for (id, p) in nucleus(&probs, params.top_p) {
        out[id as usize] = p;
    }
    out
}

/// Argmax with ties broken by the lowest id.
pub fn argmax(row: &[f32]) -> u32 {
    let probs = tensor::softmax(row);
    nucleus(&probs, f64::MIN_POSITIVE)[0].0
}
