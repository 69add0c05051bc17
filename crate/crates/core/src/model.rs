//! GPT-2-family decoder-only transformer with residual-stream hooks.
//!
//! The stream entering block `l` is what hooks see: injections at `l` are
//! added there (before the block's first layernorm) and captures at `l`
//! snapshot the stream after those injections. Block 0's input is the
//! token + positional embedding.

use std::collections::BTreeSet;
use std::path::Path;

use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Map;

use crate::aawf;
use crate::error::{Error, Result};
use crate::tensor::{self, gelu, layer_norm, linear, Matrix};
use crate::tokenizer::TokenSequence;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n_layers: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub vocab_size: usize,
    pub max_positions: usize,
    pub layernorm_epsilon: f32,
}

impl ModelConfig {
    pub fn gpt2_small() -> Self {
        Self {
            n_layers: 12,
            d_model: 768,
            n_heads: 12,
            vocab_size: 50257,
            max_positions: 1024,
            layernorm_epsilon: 1e-5,
        }
    }

    /// A small configuration over the 257-token byte-level vocabulary, for
    /// tests and demos with [`Model::random`].
    pub fn tiny_byte_level() -> Self {
        Self {
            n_layers: 4,
            d_model: 32,
            n_heads: 4,
            vocab_size: 257,
            max_positions: 128,
            layernorm_epsilon: 1e-5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("n_layers", self.n_layers),
            ("d_model", self.d_model),
            ("n_heads", self.n_heads),
            ("vocab_size", self.vocab_size),
            ("max_positions", self.max_positions),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.d_model % self.n_heads != 0 {
            return Err(Error::Config(format!(
                "d_model {} is not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if !(self.layernorm_epsilon > 0.0) || !self.layernorm_epsilon.is_finite() {
            return Err(Error::Config(format!(
                "layernorm_epsilon must be positive, got {}",
                self.layernorm_epsilon
            )));
        }
        Ok(())
    }

    pub fn d_head(&self) -> usize {
        self.d_model / self.n_heads
    }
}

#[derive(Debug, Clone)]
pub struct LayerNormWeights {
    pub gain: Vec<f32>,
    pub bias: Vec<f32>,
}

/// Affine map stored `out_features × in_features`, row-major.
#[derive(Debug, Clone)]
pub struct LinearWeights {
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
    pub out_features: usize,
    pub in_features: usize,
}

impl LinearWeights {
    fn apply(&self, x: &Matrix) -> Matrix {
        linear(x, &self.weight, Some(&self.bias), self.out_features)
    }
}

#[derive(Debug, Clone)]
pub struct BlockWeights {
    pub ln1: LayerNormWeights,
    pub qkv: LinearWeights,
    pub proj: LinearWeights,
    pub ln2: LayerNormWeights,
    pub up: LinearWeights,
    pub down: LinearWeights,
}

/// All parameters. The unembedding is tied to `wte`.
#[derive(Debug, Clone)]
pub struct Weights {
    /// `vocab_size × d_model`
    pub wte: Vec<f32>,
    /// `max_positions × d_model`
    pub wpe: Vec<f32>,
    pub blocks: Vec<BlockWeights>,
    pub lnf: LayerNormWeights,
}

/// The stream entering block `layer`, one row per token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSnapshot {
    pub layer: usize,
    pub activations: Matrix,
}

/// Rows of `delta` are added to stream positions `start..start + delta.rows`
/// at the input of block `layer`.
#[derive(Debug, Clone, PartialEq)]
pub struct Injection {
    pub layer: usize,
    pub start: usize,
    pub delta: Matrix,
}

impl Injection {
    pub fn positions(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.delta.rows
    }
}

/// Per-pass capture and injection requests.
#[derive(Debug, Clone, Default)]
pub struct HookSet {
    pub capture_layers: BTreeSet<usize>,
    pub injections: Vec<Injection>,
}

impl HookSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn capture(mut self, layer: usize) -> Self {
        self.capture_layers.insert(layer);
        self
    }

    pub fn capture_all(mut self, n_layers: usize) -> Self {
        self.capture_layers.extend(0..n_layers);
        self
    }

    pub fn inject(mut self, injection: Injection) -> Self {
        self.injections.push(injection);
        self
    }

    pub fn is_empty(&self) -> bool {
        self.capture_layers.is_empty() && self.injections.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct ForwardResult {
    /// `sequence length × vocab_size`
    pub logits: Matrix,
    /// Snapshots in increasing layer order.
    pub captured: Vec<ResidualSnapshot>,
    /// Stream positions touched by injections, sorted.
    pub modified_positions: Vec<usize>,
}

impl ForwardResult {
    pub fn snapshot(&self, layer: usize) -> Option<&ResidualSnapshot> {
        self.captured.iter().find(|s| s.layer == layer)
    }
}

#[derive(Debug, Clone, Default)]
struct LayerCache {
    keys: Vec<f32>,
    values: Vec<f32>,
}

/// Which logit rows to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LogitRows {
    All,
    Last,
}

#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub weights: Weights,
    /// Hex SHA-256 of the serialized weight file.
    pub hash: String,
}

fn tensor_names(layer: usize) -> [String; 12] {
    let p = format!("h.{layer}");
    [
        format!("{p}.ln1.g"),
        format!("{p}.ln1.b"),
        format!("{p}.attn.qkv.w"),
        format!("{p}.attn.qkv.b"),
        format!("{p}.attn.proj.w"),
        format!("{p}.attn.proj.b"),
        format!("{p}.ln2.g"),
        format!("{p}.ln2.b"),
        format!("{p}.mlp.up.w"),
        format!("{p}.mlp.up.b"),
        format!("{p}.mlp.down.w"),
        format!("{p}.mlp.down.b"),
    ]
}

impl Model {
    /// Load and validate an AAWF model file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let container = aawf::read(path.as_ref())?;
        Self::from_container(container)
    }

    pub fn from_container(mut c: aawf::Container) -> Result<Self> {
        if c.kind != "model" {
            return Err(Error::Format(format!("expected a model file, found kind `{}`", c.kind)));
        }
        let config: ModelConfig = serde_json::from_value(
            c.extra
                .get("config")
                .cloned()
                .ok_or_else(|| Error::Format("header has no `config`".into()))?,
        )
        .map_err(|e| Error::Format(format!("bad config: {e}")))?;
        config.validate()?;
        let d = config.d_model;

        let wte = c.take("wte", &[config.vocab_size, d])?;
        let wpe = c.take("wpe", &[config.max_positions, d])?;
        let mut blocks = Vec::with_capacity(config.n_layers);
        for layer in 0..config.n_layers {
            let [ln1g, ln1b, qkvw, qkvb, projw, projb, ln2g, ln2b, upw, upb, downw, downb] =
                tensor_names(layer);
            let lin = |c: &mut aawf::Container, w: &str, b: &str, out: usize, inp: usize| -> Result<LinearWeights> {
                Ok(LinearWeights {
                    weight: c.take(w, &[out, inp])?,
                    bias: c.take(b, &[out])?,
                    out_features: out,
                    in_features: inp,
                })
            };
            blocks.push(BlockWeights {
                ln1: LayerNormWeights {
                    gain: c.take(&ln1g, &[d])?,
                    bias: c.take(&ln1b, &[d])?,
                },
                qkv: lin(&mut c, &qkvw, &qkvb, 3 * d, d)?,
                proj: lin(&mut c, &projw, &projb, d, d)?,
                ln2: LayerNormWeights {
                    gain: c.take(&ln2g, &[d])?,
                    bias: c.take(&ln2b, &[d])?,
                },
                up: lin(&mut c, &upw, &upb, 4 * d, d)?,
                down: lin(&mut c, &downw, &downb, d, 4 * d)?,
            });
        }
        let lnf = LayerNormWeights {
            gain: c.take("lnf.g", &[d])?,
            bias: c.take("lnf.b", &[d])?,
        };
        let weights = Weights { wte, wpe, blocks, lnf };
        Self::check_finite(&weights)?;
        Ok(Self {
            config,
            weights,
            hash: c.file_hash,
        })
    }

    fn check_finite(w: &Weights) -> Result<()> {
        let mut all: Vec<(&str, &[f32])> = vec![("wte", &w.wte), ("wpe", &w.wpe)];
        for b in &w.blocks {
            all.extend([
                ("ln1", b.ln1.gain.as_slice()),
                ("ln1", &b.ln1.bias),
                ("attn.qkv", &b.qkv.weight),
                ("attn.qkv", &b.qkv.bias),
                ("attn.proj", &b.proj.weight),
                ("attn.proj", &b.proj.bias),
                ("ln2", &b.ln2.gain),
                ("ln2", &b.ln2.bias),
                ("mlp.up", &b.up.weight),
                ("mlp.up", &b.up.bias),
                ("mlp.down", &b.down.weight),
                ("mlp.down", &b.down.bias),
            ]);
        }
        all.extend([("lnf", w.lnf.gain.as_slice()), ("lnf", &w.lnf.bias)]);
        for (name, data) in all {
            if data.iter().any(|v| !v.is_finite()) {
                return Err(Error::Format(format!("tensor `{name}` contains non-finite values")));
            }
        }
        Ok(())
    }

    /// Serialize into AAWF bytes.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let c = &self.config;
        let d = c.d_model;
        let mut names: Vec<String> = vec!["wte".into(), "wpe".into()];
        let mut shapes: Vec<Vec<usize>> = vec![vec![c.vocab_size, d], vec![c.max_positions, d]];
        let mut datas: Vec<&[f32]> = vec![&self.weights.wte, &self.weights.wpe];
        for (layer, b) in self.weights.blocks.iter().enumerate() {
            let tensors: [(&[f32], Vec<usize>); 12] = [
                (&b.ln1.gain, vec![d]),
                (&b.ln1.bias, vec![d]),
                (&b.qkv.weight, vec![3 * d, d]),
                (&b.qkv.bias, vec![3 * d]),
                (&b.proj.weight, vec![d, d]),
                (&b.proj.bias, vec![d]),
                (&b.ln2.gain, vec![d]),
                (&b.ln2.bias, vec![d]),
                (&b.up.weight, vec![4 * d, d]),
                (&b.up.bias, vec![4 * d]),
                (&b.down.weight, vec![d, 4 * d]),
                (&b.down.bias, vec![d]),
            ];
            for (name, (data, shape)) in tensor_names(layer).into_iter().zip(tensors) {
                names.push(name);
                shapes.push(shape);
                datas.push(data);
            }
        }
        names.extend(["lnf.g".to_string(), "lnf.b".to_string()]);
        shapes.extend([vec![d], vec![d]]);
        datas.extend([self.weights.lnf.gain.as_slice(), &self.weights.lnf.bias]);

        let tensors: Vec<(&str, &[usize], &[f32])> = names
            .iter()
            .zip(&shapes)
            .zip(&datas)
            .map(|((n, s), d)| (n.as_str(), s.as_slice(), *d))
            .collect();
        let mut extra = Map::new();
        extra.insert("config".into(), serde_json::to_value(c)?);
        aawf::to_bytes("model", extra, &tensors)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes = self.to_bytes()?;
        let tmp = path.with_extension("aawf.partial");
        std::fs::write(&tmp, &bytes).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    /// A randomly initialized model (GPT-2 style: N(0, 0.02) matrices,
    /// unit gains, zero biases). Used for synthetic workloads and fixtures.
    pub fn random(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        let mut normal = |n: usize, std: f32| -> Vec<f32> {
            (0..n)
                .map(|_| {
                    let z: f32 = StandardNormal.sample(&mut rng);
                    z * std
                })
                .collect()
        };
        let d = config.d_model;
        let wte = normal(config.vocab_size * d, 0.02);
        let wpe = normal(config.max_positions * d, 0.01);
        let ln = || LayerNormWeights {
            gain: vec![1.0; d],
            bias: vec![0.0; d],
        };
        let mut blocks = Vec::with_capacity(config.n_layers);
        for _ in 0..config.n_layers {
            let mut lin = |out: usize, inp: usize| LinearWeights {
                weight: normal(out * inp, 0.02),
                bias: vec![0.0; out],
                out_features: out,
                in_features: inp,
            };
            let qkv = lin(3 * d, d);
            let proj = lin(d, d);
            let up = lin(4 * d, d);
            let down = lin(d, 4 * d);
            blocks.push(BlockWeights {
                ln1: ln(),
                qkv,
                proj,
                ln2: ln(),
                up,
                down,
            });
        }
        let mut model = Self {
            config,
            weights: Weights {
                wte,
                wpe,
                blocks,
                lnf: ln(),
            },
            hash: String::new(),
        };
        let bytes = model.to_bytes()?;
        model.hash = aawf::from_bytes(&bytes)?.file_hash;
        Ok(model)
    }

    fn validate_tokens(&self, ids: &[u32], offset: usize) -> Result<()> {
        for (i, &id) in ids.iter().enumerate() {
            if id as usize >= self.config.vocab_size {
                return Err(Error::TokenOutOfRange {
                    id,
                    position: offset + i,
                    vocab_size: self.config.vocab_size,
                });
            }
        }
        if offset + ids.len() > self.config.max_positions {
            return Err(Error::Validation(format!(
                "sequence length {} exceeds max_positions {}",
                offset + ids.len(),
                self.config.max_positions
            )));
        }
        Ok(())
    }

    fn validate_hooks(&self, hooks: &HookSet, seq_len: usize) -> Result<()> {
        let n = self.config.n_layers;
        if let Some(&l) = hooks.capture_layers.iter().find(|&&l| l >= n) {
            return Err(Error::Validation(format!("capture layer {l} out of range 0..{n}")));
        }
        for inj in &hooks.injections {
            if inj.layer >= n {
                return Err(Error::Validation(format!(
                    "injection layer {} out of range 0..{n}",
                    inj.layer
                )));
            }
            if inj.delta.cols != self.config.d_model {
                return Err(Error::Validation(format!(
                    "injection width {} does not match d_model {}",
                    inj.delta.cols, self.config.d_model
                )));
            }
            if inj.start + inj.delta.rows > seq_len {
                return Err(Error::Validation(format!(
                    "injection rows [{}, {}) exceed sequence length {seq_len}",
                    inj.start,
                    inj.start + inj.delta.rows
                )));
            }
        }
        Ok(())
    }

    /// Token + positional embedding for `ids` placed at `offset`.
    pub fn embed(&self, ids: &[u32], offset: usize) -> Matrix {
        let d = self.config.d_model;
        let mut x = Matrix::zeros(ids.len(), d);
        for (i, &id) in ids.iter().enumerate() {
            let tok = &self.weights.wte[id as usize * d..(id as usize + 1) * d];
            let pos = &self.weights.wpe[(offset + i) * d..(offset + i + 1) * d];
            for ((o, t), p) in x.row_mut(i).iter_mut().zip(tok).zip(pos) {
                *o = t + p;
            }
        }
        x
    }

    /// Full forward pass over `seq` with the given hooks.
    pub fn forward(&self, seq: &TokenSequence, hooks: &HookSet) -> Result<ForwardResult> {
        if seq.is_empty() {
            return Err(Error::Validation("cannot run a forward pass on an empty sequence".into()));
        }
        self.validate_tokens(&seq.ids, 0)?;
        self.validate_hooks(hooks, seq.len())?;
        let mut stream = self.embed(&seq.ids, 0);
        let mut caches = vec![LayerCache::default(); self.config.n_layers];
        let mut captured = Vec::new();
        let mut modified = BTreeSet::new();
        self.run_blocks(&mut stream, 0, 0, &mut caches, hooks, &mut captured, &mut modified)?;
        Ok(ForwardResult {
            logits: self.unembed(&stream, LogitRows::All),
            captured,
            modified_positions: modified.into_iter().collect(),
        })
    }

    /// Resume a pass from the stream entering block `layer`. Hooks at
    /// `layer` and later are applied; earlier hooks are ignored.
    pub fn forward_from(&self, layer: usize, stream: Matrix, hooks: &HookSet) -> Result<ForwardResult> {
        if layer > self.config.n_layers {
            return Err(Error::Validation(format!(
                "resume layer {layer} out of range 0..={}",
                self.config.n_layers
            )));
        }
        if stream.cols != self.config.d_model || stream.rows == 0 || stream.rows > self.config.max_positions {
            return Err(Error::Validation(format!(
                "resume stream has shape {}x{}, expected (1..={})x{}",
                stream.rows, stream.cols, self.config.max_positions, self.config.d_model
            )));
        }
        self.validate_hooks(hooks, stream.rows)?;
        let mut stream = stream;
        let mut caches = vec![LayerCache::default(); self.config.n_layers];
        let mut captured = Vec::new();
        let mut modified = BTreeSet::new();
        self.run_blocks(&mut stream, 0, layer, &mut caches, hooks, &mut captured, &mut modified)?;
        Ok(ForwardResult {
            logits: self.unembed(&stream, LogitRows::All),
            captured,
            modified_positions: modified.into_iter().collect(),
        })
    }

    /// Start an incremental decoding session with a per-session KV cache.
    pub fn session(&self) -> Session<'_> {
        Session {
            model: self,
            caches: vec![LayerCache::default(); self.config.n_layers],
            len: 0,
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn run_blocks(
        &self,
        stream: &mut Matrix,
        pos0: usize,
        first_layer: usize,
        caches: &mut [LayerCache],
        hooks: &HookSet,
        captured: &mut Vec<ResidualSnapshot>,
        modified: &mut BTreeSet<usize>,
    ) -> Result<()> {
        let rows = pos0..pos0 + stream.rows;
        for layer in first_layer..self.config.n_layers {
            for inj in hooks.injections.iter().filter(|inj| inj.layer == layer) {
                for (j, pos) in inj.positions().enumerate() {
                    if rows.contains(&pos) {
                        let target = stream.row_mut(pos - pos0);
                        for (s, d) in target.iter_mut().zip(inj.delta.row(j)) {
                            *s += d;
                        }
                        modified.insert(pos);
                    }
                }
            }
            if hooks.capture_layers.contains(&layer) {
                captured.push(ResidualSnapshot {
                    layer,
                    activations: stream.clone(),
                });
            }
            self.block(layer, stream, pos0, &mut caches[layer]);
            if let Some(i) = stream.data.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite {
                    layer,
                    position: pos0 + i / stream.cols,
                });
            }
        }
        Ok(())
    }

    fn block(&self, layer: usize, stream: &mut Matrix, pos0: usize, cache: &mut LayerCache) {
        let cfg = &self.config;
        let w = &self.weights.blocks[layer];
        let d = cfg.d_model;
        let eps = cfg.layernorm_epsilon;

        let h = layer_norm(stream, &w.ln1.gain, &w.ln1.bias, eps);
        let qkv = w.qkv.apply(&h);
        for r in 0..qkv.rows {
            let row = qkv.row(r);
            cache.keys.extend_from_slice(&row[d..2 * d]);
            cache.values.extend_from_slice(&row[2 * d..3 * d]);
        }
        let attn = self.attention(&qkv, pos0, cache);
        let out = w.proj.apply(&attn);
        for (s, o) in stream.data.iter_mut().zip(&out.data) {
            *s += o;
        }

        let h = layer_norm(stream, &w.ln2.gain, &w.ln2.bias, eps);
        let mut up = w.up.apply(&h);
        up.data.par_iter_mut().for_each(|v| *v = gelu(*v));
        let down = w.down.apply(&up);
        for (s, o) in stream.data.iter_mut().zip(&down.data) {
            *s += o;
        }
    }

    /// Causal multi-head attention for the new rows in `qkv`, whose absolute
    /// positions start at `pos0`; keys and values for positions `0..=p` come
    /// from the cache.
    fn attention(&self, qkv: &Matrix, pos0: usize, cache: &LayerCache) -> Matrix {
        let d = self.config.d_model;
        let dh = self.config.d_head();
        let heads = self.config.n_heads;
        let scale = 1.0 / (dh as f32).sqrt();
        let mut out = Matrix::zeros(qkv.rows, d);
        out.data
            .par_chunks_mut(d)
            .enumerate()
            .for_each(|(r, out_row)| {
                let p = pos0 + r;
                let q_row = &qkv.row(r)[..d];
                let mut scores = vec![0.0f32; p + 1];
                for h in 0..heads {
                    let q = &q_row[h * dh..(h + 1) * dh];
                    let mut max = f32::NEG_INFINITY;
                    for (j, s) in scores.iter_mut().enumerate() {
                        let k = &cache.keys[j * d + h * dh..j * d + (h + 1) * dh];
                        *s = tensor::dot(q, k) * scale;
                        max = max.max(*s);
                    }
                    let mut total = 0.0f32;
                    for s in scores.iter_mut() {
                        *s = (*s - max).exp();
                        total += *s;
                    }
                    let o = &mut out_row[h * dh..(h + 1) * dh];
                    for (j, s) in scores.iter().enumerate() {
                        let weight = s / total;
                        let v = &cache.values[j * d + h * dh..j * d + (h + 1) * dh];
                        for (oo, vv) in o.iter_mut().zip(v) {
                            *oo += weight * vv;
                        }
                    }
                }
            });
        out
    }

    fn unembed(&self, stream: &Matrix, rows: LogitRows) -> Matrix {
        let lnf = &self.weights.lnf;
        let x = match rows {
            LogitRows::All => layer_norm(stream, &lnf.gain, &lnf.bias, self.config.layernorm_epsilon),
            LogitRows::Last => layer_norm(
                &stream.slice_rows(stream.rows - 1, stream.rows),
                &lnf.gain,
                &lnf.bias,
                self.config.layernorm_epsilon,
            ),
        };
        linear(&x, &self.weights.wte, None, self.config.vocab_size)
    }
}

/// Incremental decoding state. Feeding a sequence in several chunks yields
/// bit-identical logits to one full [`Model::forward`] call.
pub struct Session<'m> {
    model: &'m Model,
    caches: Vec<LayerCache>,
    len: usize,
}

impl Session<'_> {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Append tokens and return the logits row for the last of them.
    /// Injections are given in absolute positions; only rows that fall
    /// inside this chunk are applied.
    pub fn extend(&mut self, ids: &[u32], injections: &[Injection]) -> Result<Vec<f32>> {
        if ids.is_empty() {
            return Err(Error::Validation("empty chunk".into()));
        }
        let model = self.model;
        model.validate_tokens(ids, self.len)?;
        let hooks = HookSet {
            capture_layers: BTreeSet::new(),
            injections: injections.to_vec(),
        };
        model.validate_hooks(&hooks, model.config.max_positions)?;
        let mut stream = model.embed(ids, self.len);
        let mut captured = Vec::new();
        let mut modified = BTreeSet::new();
        model.run_blocks(&mut stream, self.len, 0, &mut self.caches, &hooks, &mut captured, &mut modified)?;
        self.len += ids.len();
        Ok(model.unembed(&stream, LogitRows::Last).data)
    }
}

/// Per-token log-probabilities of `targets` under `result`.
///
/// Target `k` is scored from logits row `k - 1`; position 0 has no
/// prediction, so the output has `targets.len() - 1` entries.
pub fn logprobs(result: &ForwardResult, targets: &TokenSequence) -> Result<Vec<f64>> {
    if targets.len() != result.logits.rows {
        return Err(Error::LengthMismatch(format!(
            "{} targets for {} logit rows",
            targets.len(),
            result.logits.rows
        )));
    }
    let vocab = result.logits.cols;
    (1..targets.len())
        .map(|k| {
            let t = targets.ids[k] as usize;
            if t >= vocab {
                return Err(Error::TokenOutOfRange {
                    id: t as u32,
                    position: k,
                    vocab_size: vocab,
                });
            }
            Ok(tensor::log_softmax(result.logits.row(k - 1))[t])
        })
        .collect()
}
