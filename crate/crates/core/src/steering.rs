//! ActAdd steering vectors.
//!
//! A vector is `c · (h+ − h−)` captured at the input of block `l` for a
//! whitespace-padded contrast pair. Row 0 belongs to the shared BOS token.
//!
//! Alignment: row `j` of the delta is added at stream position `a − 1 + j`,
//! so with the default `a = 1` row 0 sits on the user prompt's BOS and the
//! first content row lands on position 1 ("front" addition). Position 0 is
//! never written; the positions a vector modifies are `[a, a − 1 + rows)`.

use std::ops::Range;
use std::path::Path;

use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::aawf;
use crate::engine::Engine;
use crate::error::{Error, Result};
use crate::model::{HookSet, Injection, ModelConfig};
use crate::tensor::{l2_norm, Matrix};
use crate::tokenizer::{normalize_steering_prompt, BpeVocab, TokenSequence};

pub const VECTOR_KIND: &str = "steering_vector";

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawPair")]
pub struct ContrastPair {
    p_plus: String,
    p_minus: String,
}

#[derive(Deserialize)]
struct RawPair {
    p_plus: String,
    p_minus: String,
}

impl TryFrom<RawPair> for ContrastPair {
    type Error = Error;

    fn try_from(raw: RawPair) -> Result<Self> {
        ContrastPair::new(&raw.p_plus, &raw.p_minus)
    }
}

impl ContrastPair {
    pub fn new(p_plus: &str, p_minus: &str) -> Result<Self> {
        let p_plus = normalize_steering_prompt(p_plus);
        let p_minus = normalize_steering_prompt(p_minus);
        if p_plus.is_empty() && p_minus.is_empty() {
            return Err(Error::Validation("contrast pair: both prompts are empty".into()));
        }
        Ok(Self { p_plus, p_minus })
    }

    pub fn p_plus(&self) -> &str {
        &self.p_plus
    }

    pub fn p_minus(&self) -> &str {
        &self.p_minus
    }
}

fn default_alignment() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteeringSpec {
    pub pair: ContrastPair,
    pub layer: usize,
    pub coefficient: f32,
    #[serde(default = "default_alignment")]
    pub alignment: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim_cutoff: Option<usize>,
}

impl SteeringSpec {
    pub fn new(pair: ContrastPair, layer: usize, coefficient: f32) -> Self {
        Self {
            pair,
            layer,
            coefficient,
            alignment: 1,
            dim_cutoff: None,
        }
    }

    pub fn validate(&self, config: &ModelConfig) -> Result<()> {
        if self.layer >= config.n_layers {
            return Err(Error::Validation(format!(
                "layer {} out of range; valid layers are 0..={} for a {}-layer model",
                self.layer,
                config.n_layers - 1,
                config.n_layers
            )));
        }
        if self.alignment < 1 {
            return Err(Error::Validation("alignment must be >= 1 (position 0 is BOS)".into()));
        }
        if !self.coefficient.is_finite() {
            return Err(Error::Validation("coefficient must be finite".into()));
        }
        if let Some(n) = self.dim_cutoff {
            if n > config.d_model {
                return Err(Error::Validation(format!(
                    "dim_cutoff {n} exceeds d_model {}",
                    config.d_model
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteeringVector {
    pub layer: usize,
    pub delta: Matrix,
    pub alignment: usize,
    pub coefficient: f32,
    pub pair: Option<ContrastPair>,
}

impl SteeringVector {
    pub fn rows(&self) -> usize {
        self.delta.rows
    }

    /// Stream positions the content rows (1..rows) are written to.
    pub fn modified_positions(&self) -> Range<usize> {
        self.alignment..self.alignment + self.delta.rows.saturating_sub(1)
    }

    /// Number of leading logits rows whose predictions are contaminated by
    /// the injection, for a sequence of `seq_len` tokens. Zero when the
    /// vector adds nothing.
    pub fn mask_len(&self, seq_len: usize) -> usize {
        if self.is_zero() {
            return 0;
        }
        self.modified_positions().end.min(seq_len)
    }

    pub fn is_zero(&self) -> bool {
        self.delta.is_zero()
    }

    pub fn check_model(&self, config: &ModelConfig) -> Result<()> {
        if self.layer >= config.n_layers {
            return Err(Error::Validation(format!(
                "vector layer {} out of range for a {}-layer model",
                self.layer, config.n_layers
            )));
        }
        if self.delta.cols != config.d_model {
            return Err(Error::Validation(format!(
                "vector width {} does not match d_model {}",
                self.delta.cols, config.d_model
            )));
        }
        if self.alignment < 1 {
            return Err(Error::Validation("alignment must be >= 1".into()));
        }
        Ok(())
    }

    /// Whether the last content row lands on the final position of a
    /// `seq_len`-token prompt.
    pub fn touches_last_position(&self, seq_len: usize) -> bool {
        let r = self.modified_positions();
        !r.is_empty() && r.contains(&(seq_len - 1))
    }

    /// The injection for a sequence of `seq_len` tokens, with rows past the
    /// end of the sequence clipped. `None` when nothing would change.
    pub fn injection(&self, seq_len: usize) -> Option<Injection> {
        if self.is_zero() || self.alignment >= seq_len {
            return None;
        }
        let end = self.modified_positions().end.min(seq_len);
        if end < self.modified_positions().end {
            log::debug!(
                "steering vector clipped from {} to {} positions",
                self.delta.rows - 1,
                end - self.alignment
            );
        }
        let rows = end - self.alignment;
        Some(Injection {
            layer: self.layer,
            start: self.alignment,
            delta: self.delta.slice_rows(1, 1 + rows),
        })
    }

    pub fn hooks(&self, seq_len: usize) -> HookSet {
        match self.injection(seq_len) {
            Some(inj) => HookSet::new().inject(inj),
            None => HookSet::new(),
        }
    }

    pub fn with_layer(mut self, layer: usize) -> Self {
        self.layer = layer;
        self
    }

    /// Per-row L2 norms.
    pub fn norms(&self) -> Vec<f64> {
        self.delta.row_norms()
    }

    /// Hex SHA-256 of the exported container; stable across export/import.
    pub fn content_hash(&self) -> Result<String> {
        use sha2::{Digest, Sha256};
        Ok(hex::encode(Sha256::digest(self.to_bytes()?)))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut extra = Map::new();
        extra.insert("layer".into(), json!(self.layer));
        extra.insert("alignment".into(), json!(self.alignment));
        extra.insert("coefficient".into(), json!(self.coefficient));
        extra.insert("pair".into(), serde_json::to_value(&self.pair)?);
        extra.insert("d_model".into(), json!(self.delta.cols));
        extra.insert("rows".into(), json!(self.delta.rows));
        aawf::to_bytes(
            VECTOR_KIND,
            extra,
            &[("delta", &[self.delta.rows, self.delta.cols], &self.delta.data)],
        )
    }

    pub fn export(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes = self.to_bytes()?;
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    pub fn import(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_container(aawf::read(path.as_ref())?)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Self::from_container(aawf::from_bytes(bytes)?)
    }

    fn from_container(mut c: aawf::Container) -> Result<Self> {
        if c.kind != VECTOR_KIND {
            return Err(Error::Format(format!("expected a steering vector, found kind `{}`", c.kind)));
        }
        let field = |name: &str| -> Result<&Value> {
            c.extra
                .get(name)
                .ok_or_else(|| Error::Format(format!("steering vector header lacks `{name}`")))
        };
        let as_usize = |v: &Value, name: &str| {
            v.as_u64()
                .map(|x| x as usize)
                .ok_or_else(|| Error::Format(format!("`{name}` must be a non-negative integer")))
        };
        let layer = as_usize(field("layer")?, "layer")?;
        let alignment = as_usize(field("alignment")?, "alignment")?;
        let d_model = as_usize(field("d_model")?, "d_model")?;
        let rows = as_usize(field("rows")?, "rows")?;
        let coefficient = field("coefficient")?
            .as_f64()
            .ok_or_else(|| Error::Format("`coefficient` must be a number".into()))? as f32;
        let pair: Option<ContrastPair> = serde_json::from_value(field("pair")?.clone())
            .map_err(|e| Error::Format(format!("bad `pair`: {e}")))?;
        let data = c.take("delta", &[rows, d_model])?;
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("steering vector contains non-finite values".into()));
        }
        Ok(Self {
            layer,
            delta: Matrix::from_vec(rows, d_model, data),
            alignment,
            coefficient,
            pair,
        })
    }
}

/// Encode both prompts with BOS and right-pad the shorter with the space
/// token.
pub fn pad_contrast_pair(vocab: &BpeVocab, pair: &ContrastPair) -> Result<(TokenSequence, TokenSequence)> {
    let space = vocab
        .space_id()
        .ok_or_else(|| Error::Vocab("vocabulary has no single-space token".into()))?;
    let mut plus = vocab.encode(&pair.p_plus, true);
    let mut minus = vocab.encode(&pair.p_minus, true);
    let n = plus.len().max(minus.len());
    plus.ids.resize(n, space);
    minus.ids.resize(n, space);
    Ok((plus, minus))
}

/// `h+ − h−` at `layer`, both captured from clean passes.
fn contrast_difference(engine: &Engine, pair: &ContrastPair, layer: usize) -> Result<Matrix> {
    let (plus, minus) = pad_contrast_pair(&engine.vocab, pair)?;
    let hooks = HookSet::new().capture(layer);
    let (a, b) = rayon::join(
        || engine.model.forward(&plus, &hooks),
        || engine.model.forward(&minus, &hooks),
    );
    let (a, b) = (a?, b?);
    let hp = &a.snapshot(layer).expect("captured").activations;
    let hm = &b.snapshot(layer).expect("captured").activations;
    let data = hp.data.iter().zip(&hm.data).map(|(x, y)| x - y).collect();
    Ok(Matrix::from_vec(hp.rows, hp.cols, data))
}

fn zero_columns_from(m: &mut Matrix, n: usize) {
    for r in 0..m.rows {
        for v in &mut m.row_mut(r)[n..] {
            *v = 0.0;
        }
    }
}

fn scale_matrix(m: &mut Matrix, factor: f32) {
    for v in &mut m.data {
        *v *= factor;
    }
}

pub fn build_steering_vector(engine: &Engine, spec: &SteeringSpec) -> Result<SteeringVector> {
    spec.validate(&engine.model.config)?;
    let mut delta = contrast_difference(engine, &spec.pair, spec.layer)?;
    if let Some(n) = spec.dim_cutoff {
        zero_columns_from(&mut delta, n);
    }
    scale_matrix(&mut delta, spec.coefficient);
    Ok(SteeringVector {
        layer: spec.layer,
        delta,
        alignment: spec.alignment,
        coefficient: spec.coefficient,
        pair: Some(spec.pair.clone()),
    })
}

pub fn scale(vec: &SteeringVector, factor: f32) -> SteeringVector {
    let mut out = vec.clone();
    scale_matrix(&mut out.delta, factor);
    out.coefficient *= factor;
    out
}

/// Keep only the first `n` coordinates of every row.
pub fn restrict_dims(vec: &SteeringVector, n: usize) -> SteeringVector {
    let mut out = vec.clone();
    let n = n.min(out.delta.cols);
    zero_columns_from(&mut out.delta, n);
    out
}

/// Standard-normal matrix of the same shape with every row rescaled to the
/// L2 norm of the matching row of `vec`.
pub fn random_matched_vector(vec: &SteeringVector, seed: u64) -> SteeringVector {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let (rows, cols) = (vec.delta.rows, vec.delta.cols);
    let mut data = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let sample: Vec<f64> = (0..cols).map(|_| StandardNormal.sample(&mut rng)).collect();
        let target = l2_norm(vec.delta.row(r));
        let norm = sample.iter().map(|x| x * x).sum::<f64>().sqrt();
        let k = if target == 0.0 || norm == 0.0 { 0.0 } else { target / norm };
        data.extend(sample.iter().map(|x| (x * k) as f32));
    }
    SteeringVector {
        layer: vec.layer,
        delta: Matrix::from_vec(rows, cols, data),
        alignment: vec.alignment,
        coefficient: vec.coefficient,
        pair: None,
    }
}

/// Capture the contrast difference before block `src` and inject it before
/// block `dst`.
pub fn transplant_vector(
    engine: &Engine,
    pair: &ContrastPair,
    src: usize,
    dst: usize,
    coefficient: f32,
) -> Result<SteeringVector> {
    let n_layers = engine.model.config.n_layers;
    if dst >= n_layers {
        return Err(Error::Validation(format!(
            "destination layer {dst} out of range for a {n_layers}-layer model"
        )));
    }
    let spec = SteeringSpec::new(pair.clone(), src, coefficient);
    Ok(build_steering_vector(engine, &spec)?.with_layer(dst))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormProfile {
    pub prompt: TokenSequence,
    pub coefficient: f32,
    /// `ratios[l][i]` = ‖c·(h+ − h−)ᵢ‖ / ‖sᵢ‖ at layer `l`; `None` where the
    /// stream norm is zero.
    pub ratios: Vec<Vec<Option<f64>>>,
}

pub fn norm_profile(engine: &Engine, user_prompt: &str, pair: &ContrastPair, coefficient: f32) -> Result<NormProfile> {
    let n_layers = engine.model.config.n_layers;
    let (plus, minus) = pad_contrast_pair(&engine.vocab, pair)?;
    let prompt = engine.encode_prompt(user_prompt);
    if prompt.len() < plus.len() {
        return Err(Error::Validation(format!(
            "prompt has {} tokens, shorter than the contrast pair's {}",
            prompt.len(),
            plus.len()
        )));
    }
    let hooks = HookSet::new().capture_all(n_layers);
    let run = |s: &TokenSequence| engine.model.forward(s, &hooks);
    let (a, (b, s)) = rayon::join(|| run(&plus), || rayon::join(|| run(&minus), || run(&prompt)));
    let (a, b, s) = (a?, b?, s?);
    let ratios = (0..n_layers)
        .map(|l| {
            let hp = &a.snapshot(l).expect("captured").activations;
            let hm = &b.snapshot(l).expect("captured").activations;
            let hs = &s.snapshot(l).expect("captured").activations;
            (0..hp.rows)
                .map(|i| {
                    let d: Vec<f32> = hp.row(i).iter().zip(hm.row(i)).map(|(x, y)| (x - y) * coefficient).collect();
                    let denom = l2_norm(hs.row(i));
                    (denom > 0.0).then(|| l2_norm(&d) / denom)
                })
                .collect()
        })
        .collect();
    Ok(NormProfile {
        prompt,
        coefficient,
        ratios,
    })
}

/// `(layer, coefficient)` candidates: c in [3, 20] and l in [6, 24] scaled
/// by `n_layers / 48`. Callers choose from these; nothing applies them
/// automatically.
pub fn hyperparameter_grid(n_layers: usize) -> Vec<(usize, f32)> {
    const COEFFICIENTS: [f32; 6] = [3.0, 5.0, 8.0, 10.0, 15.0, 20.0];
    let scale = n_layers as f64 / 48.0;
    let lo = (6.0 * scale).round() as usize;
    let hi = ((24.0 * scale).round() as usize).min(n_layers.saturating_sub(1));
    (lo..=hi)
        .flat_map(|l| COEFFICIENTS.iter().map(move |&c| (l, c)))
        .collect()
}

/// A steering vector for `layer` scaled to a model with `n_layers` blocks
/// from a reference depth of `ref_layers`.
pub fn scale_layer(layer: usize, ref_layers: usize, n_layers: usize) -> usize {
    let l = (layer as f64 * n_layers as f64 / ref_layers as f64).round() as usize;
    l.min(n_layers.saturating_sub(1))
}
