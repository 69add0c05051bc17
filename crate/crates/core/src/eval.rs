//! Evaluation procedures: perplexity ratios, the prompting baseline,
//! per-token logprob shifts, generation scoring, P@K, KL shift and the
//! inference-time premium.
//!
//! Scoring convention: sentences are encoded with BOS; sentence token `j`
//! (BOS is `j = 0`) is scored from logits row `j − 1`. A steered condition
//! masks every row below the end of the vector's modified span, and the
//! baseline it is compared with uses the same mask, so both sides score
//! exactly the same tokens.

use std::collections::{BTreeMap, HashMap};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::corpus::{self, Document, FrequencyBin, KnowledgeSet};
use crate::engine::Engine;
use crate::error::{Error, Result};
use crate::model::{HookSet, Model, ModelConfig};
use crate::sampler::{self, GenerationParams};
use crate::steering::{self, ContrastPair, SteeringSpec, SteeringVector};
use crate::tensor::{log_softmax, Matrix};
use crate::tokenizer::TokenSequence;

pub const REPORT_VERSION: u32 = 1;

/// Anything that maps a token sequence and hooks to logits.
pub trait LogitModel: Sync {
    fn config(&self) -> &ModelConfig;
    fn logits(&self, seq: &TokenSequence, hooks: &HookSet) -> Result<Matrix>;
}

impl LogitModel for Model {
    fn config(&self) -> &ModelConfig {
        &self.config
    }

    fn logits(&self, seq: &TokenSequence, hooks: &HookSet) -> Result<Matrix> {
        Ok(self.forward(seq, hooks)?.logits)
    }
}

impl LogitModel for Engine {
    fn config(&self) -> &ModelConfig {
        &self.model.config
    }

    fn logits(&self, seq: &TokenSequence, hooks: &HookSet) -> Result<Matrix> {
        self.model.logits(seq, hooks)
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Condition<'a> {
    Plain,
    Steered(&'a SteeringVector),
    /// Tokens inserted between BOS and the sentence.
    Prefixed(&'a [u32]),
}

impl Condition<'_> {
    /// First sentence-token index scored by both sides of a comparison.
    fn first_scored(&self, sentence_len: usize) -> usize {
        match self {
            Condition::Plain => 1,
            Condition::Steered(v) => v.mask_len(sentence_len) + 1,
            Condition::Prefixed(p) if p.is_empty() => 1,
            // Row p (the last prefix position) predicts sentence token 1.
            Condition::Prefixed(_) => 2,
        }
    }
}

/// Log-probabilities of `targets[first..]` read from `logits` rows
/// `first − 1 + offset ..`.
pub fn score_rows(logits: &Matrix, targets: &[u32], first: usize, offset: usize) -> Vec<f64> {
    (first.max(1)..targets.len())
        .map(|j| log_softmax(logits.row(offset + j - 1))[targets[j] as usize])
        .collect()
}

/// Sentence logprobs under `cond`, for sentence tokens `first..`.
pub fn condition_logprobs<M: LogitModel + ?Sized>(
    m: &M,
    sentence: &TokenSequence,
    cond: Condition<'_>,
    first: usize,
) -> Result<Vec<f64>> {
    if first >= sentence.len() {
        return Ok(Vec::new());
    }
    match cond {
        Condition::Plain => {
            let logits = m.logits(sentence, &HookSet::new())?;
            Ok(score_rows(&logits, &sentence.ids, first, 0))
        }
        Condition::Steered(v) => {
            let logits = m.logits(sentence, &v.hooks(sentence.len()))?;
            Ok(score_rows(&logits, &sentence.ids, first, 0))
        }
        Condition::Prefixed(prefix) => {
            let mut ids = Vec::with_capacity(sentence.len() + prefix.len());
            ids.push(sentence.ids[0]);
            ids.extend_from_slice(prefix);
            ids.extend_from_slice(&sentence.ids[1..]);
            let logits = m.logits(&TokenSequence::new(ids, true), &HookSet::new())?;
            Ok(score_rows(&logits, &sentence.ids, first, prefix.len()))
        }
    }
}

/// Baseline and conditioned logprobs over the same sentence tokens, plus
/// those tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedScores {
    pub tokens: Vec<u32>,
    pub baseline: Vec<f64>,
    pub conditioned: Vec<f64>,
}

pub fn paired_logprobs<M: LogitModel + ?Sized>(
    m: &M,
    sentence: &TokenSequence,
    cond: Condition<'_>,
) -> Result<PairedScores> {
    let first = cond.first_scored(sentence.len());
    let baseline = condition_logprobs(m, sentence, Condition::Plain, first)?;
    let conditioned = match cond {
        Condition::Plain => baseline.clone(),
        _ => condition_logprobs(m, sentence, cond, first)?,
    };
    let tokens = sentence.ids.get(first..).map(<[u32]>::to_vec).unwrap_or_default();
    Ok(PairedScores {
        tokens,
        baseline,
        conditioned,
    })
}

fn sentence_sequences(engine: &Engine, doc: &Document, reserve: usize) -> Vec<TokenSequence> {
    let limit = engine.model.config.max_positions.saturating_sub(reserve).max(2);
    doc.sentences
        .iter()
        .map(|s| {
            let mut seq = engine.vocab.encode(s, true);
            if seq.len() > limit {
                log::warn!("doc {}: sentence of {} tokens truncated to {limit}", doc.id, seq.len());
                seq.ids.truncate(limit);
            }
            seq
        })
        .collect()
}

fn reserve_for(cond: &Condition<'_>) -> usize {
    match cond {
        Condition::Prefixed(p) => p.len(),
        _ => 0,
    }
}

/// All paired scores for a document's sentences, in sentence order.
pub fn document_scores(engine: &Engine, doc: &Document, cond: Condition<'_>) -> Result<Vec<PairedScores>> {
    sentence_sequences(engine, doc, reserve_for(&cond))
        .iter()
        .map(|s| paired_logprobs(engine, s, cond))
        .collect()
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in values {
        sum += v;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

/// Mean per-token logprob of a document, with the vector applied and its
/// positions masked when present.
pub fn doc_mean_logprob(engine: &Engine, doc: &Document, steering: Option<&SteeringVector>) -> Result<f64> {
    if doc.sentences.is_empty() {
        return Err(Error::Validation(format!("document {} is empty", doc.id)));
    }
    let cond = steering.map_or(Condition::Plain, Condition::Steered);
    let scores = document_scores(engine, doc, cond)?;
    mean(scores.iter().flat_map(|s| s.conditioned.iter().copied()))
        .ok_or_else(|| Error::Validation(format!("document {} has no scorable tokens", doc.id)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinResult {
    pub label: String,
    pub lo: f64,
    pub hi: f64,
    pub documents: usize,
    pub documents_scored: usize,
    pub excluded: bool,
    /// Mean over documents of `L̄_condition − L̄_baseline`.
    pub mean_logprob_delta: Option<f64>,
    /// `exp(−mean_logprob_delta)`.
    pub perplexity_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerplexityReport {
    pub report_version: u32,
    /// `actadd`, `prompting` or `none`.
    pub condition: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steering: Option<VectorSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prefix: Option<String>,
    pub bins: Vec<BinResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorSummary {
    pub layer: usize,
    pub alignment: usize,
    pub coefficient: f32,
    pub rows: usize,
    pub pair: Option<ContrastPair>,
    pub row_norms: Vec<f64>,
}

impl From<&SteeringVector> for VectorSummary {
    fn from(v: &SteeringVector) -> Self {
        Self {
            layer: v.layer,
            alignment: v.alignment,
            coefficient: v.coefficient,
            rows: v.rows(),
            pair: v.pair.clone(),
            row_norms: v.norms(),
        }
    }
}

/// Per-document `(L̄_baseline, L̄_condition)`; `None` if no token survives
/// the mask.
fn doc_means(engine: &Engine, doc: &Document, cond: Condition<'_>) -> Result<Option<(f64, f64)>> {
    let scores = document_scores(engine, doc, cond)?;
    let base = mean(scores.iter().flat_map(|s| s.baseline.iter().copied()));
    let with = mean(scores.iter().flat_map(|s| s.conditioned.iter().copied()));
    Ok(base.zip(with))
}

fn ratio_report(
    engine: &Engine,
    docs: &[Document],
    bins: &[FrequencyBin],
    cond: Condition<'_>,
    label: &str,
) -> Result<PerplexityReport> {
    if bins.is_empty() {
        return Err(Error::Validation("no frequency bins".into()));
    }
    let by_id: HashMap<&str, &Document> = docs.iter().map(|d| (d.id.as_str(), d)).collect();
    let wanted: Vec<&Document> = bins
        .iter()
        .filter(|b| !b.excluded)
        .flat_map(|b| b.documents.iter())
        .map(|id| {
            by_id
                .get(id.as_str())
                .copied()
                .ok_or_else(|| Error::Corpus(format!("bin references unknown document {id}")))
        })
        .collect::<Result<_>>()?;
    let scored: BTreeMap<&str, Option<(f64, f64)>> = wanted
        .par_iter()
        .map(|d| Ok((d.id.as_str(), doc_means(engine, d, cond)?)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .collect();

    let results = bins
        .iter()
        .map(|b| {
            let deltas: Vec<f64> = if b.excluded {
                Vec::new()
            } else {
                b.documents
                    .iter()
                    .filter_map(|id| scored[id.as_str()].map(|(base, with)| with - base))
                    .collect()
            };
            let delta = mean(deltas.iter().copied());
            BinResult {
                label: b.label.clone(),
                lo: b.lo,
                hi: b.hi,
                documents: b.documents.len(),
                documents_scored: deltas.len(),
                excluded: b.excluded,
                mean_logprob_delta: delta,
                perplexity_ratio: delta.map(|x| (-x).exp()),
            }
        })
        .collect();
    Ok(PerplexityReport {
        report_version: REPORT_VERSION,
        condition: label.into(),
        steering: match cond {
            Condition::Steered(v) => Some(v.into()),
            _ => None,
        },
        prefix: None,
        bins: results,
    })
}

/// Per-bin perplexity ratio of the steered model against the baseline.
pub fn perplexity_ratio(
    engine: &Engine,
    docs: &[Document],
    bins: &[FrequencyBin],
    steering: Option<&SteeringVector>,
) -> Result<PerplexityReport> {
    match steering {
        Some(v) => {
            v.check_model(&engine.model.config)?;
            ratio_report(engine, docs, bins, Condition::Steered(v), "actadd")
        }
        None => ratio_report(engine, docs, bins, Condition::Plain, "none"),
    }
}

/// Perplexity ratio of prepending `prefix` (after BOS) against the
/// baseline. Predictions made from BOS and the prefix are not scored.
pub fn prompting_baseline(
    engine: &Engine,
    docs: &[Document],
    bins: &[FrequencyBin],
    prefix: &str,
) -> Result<PerplexityReport> {
    let tokens = engine.vocab.encode(prefix, false).ids;
    let mut report = ratio_report(engine, docs, bins, Condition::Prefixed(&tokens), "prompting")?;
    report.prefix = Some(prefix.to_string());
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenShift {
    pub token_id: u32,
    pub token: String,
    pub count: usize,
    pub mean_delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QqPoint {
    pub theoretical: f64,
    pub sample: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenShiftReport {
    pub report_version: u32,
    pub min_instances: usize,
    pub tokens_scored: usize,
    pub steering: VectorSummary,
    /// Tokens seen more than `min_instances` times, by id.
    pub tokens: Vec<TokenShift>,
    pub top: Vec<TokenShift>,
    pub bottom: Vec<TokenShift>,
    /// Sorted per-token mean deltas against standard-normal quantiles.
    pub qq: Vec<QqPoint>,
}

impl TokenShiftReport {
    pub fn qq_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for p in &self.qq {
            w.serialize(p).map_err(|e| Error::Validation(e.to_string()))?;
        }
        csv_string(w)
    }

    pub fn tokens_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for t in &self.tokens {
            w.serialize(t).map_err(|e| Error::Validation(e.to_string()))?;
        }
        csv_string(w)
    }
}

impl PerplexityReport {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for b in &self.bins {
            w.serialize(b).map_err(|e| Error::Validation(e.to_string()))?;
        }
        csv_string(w)
    }
}

fn csv_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Validation(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// Normal Q-Q pairs for `values` (sorted ascending), using plotting
/// positions `(i + 0.5) / n`.
pub fn qq_pairs(values: &[f64]) -> Vec<QqPoint> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    sorted
        .into_iter()
        .enumerate()
        .map(|(i, sample)| QqPoint {
            theoretical: normal.inverse_cdf((i as f64 + 0.5) / n),
            sample,
        })
        .collect()
}

pub fn token_shift(
    engine: &Engine,
    docs: &[Document],
    steering: &SteeringVector,
    min_instances: usize,
) -> Result<TokenShiftReport> {
    if docs.is_empty() {
        return Err(Error::Validation("token_shift needs at least one document".into()));
    }
    steering.check_model(&engine.model.config)?;
    let per_doc: Vec<Vec<PairedScores>> = docs
        .par_iter()
        .map(|d| document_scores(engine, d, Condition::Steered(steering)))
        .collect::<Result<_>>()?;
    let mut groups: BTreeMap<u32, (usize, f64)> = BTreeMap::new();
    let mut scored = 0;
    for s in per_doc.iter().flatten() {
        for ((&t, b), c) in s.tokens.iter().zip(&s.baseline).zip(&s.conditioned) {
            let g = groups.entry(t).or_insert((0, 0.0));
            g.0 += 1;
            g.1 += c - b;
            scored += 1;
        }
    }
    let tokens: Vec<TokenShift> = groups
        .into_iter()
        .filter(|&(_, (n, _))| n > min_instances)
        .map(|(t, (n, sum))| TokenShift {
            token_id: t,
            token: engine.vocab.decode_ids(&[t]).unwrap_or_default(),
            count: n,
            mean_delta: sum / n as f64,
        })
        .collect();
    let mut ranked = tokens.clone();
    ranked.sort_by(|a, b| b.mean_delta.total_cmp(&a.mean_delta).then(a.token_id.cmp(&b.token_id)));
    let top = ranked.iter().take(10).cloned().collect();
    let bottom = ranked.iter().rev().take(10).cloned().collect();
    let qq = qq_pairs(&tokens.iter().map(|t| t.mean_delta).collect::<Vec<_>>());
    Ok(TokenShiftReport {
        report_version: REPORT_VERSION,
        min_instances,
        tokens_scored: scored,
        steering: steering.into(),
        tokens,
        top,
        bottom,
        qq,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationScore {
    /// `None` for the unsteered baseline.
    pub layer: Option<usize>,
    pub coefficient: f32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim_fraction: Option<f64>,
    pub n: usize,
    pub mean_count: f64,
    pub fraction_with_keyword: f64,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub report_version: u32,
    pub prompt: String,
    pub params: GenerationParams,
    pub keywords: Vec<String>,
    pub baseline: GenerationScore,
    pub steered: Vec<GenerationScore>,
}

impl SweepReport {
    /// Steered entry with the highest keyword fraction (ties: lowest index).
    pub fn best(&self) -> Option<&GenerationScore> {
        self.steered
            .iter()
            .reduce(|best, s| if s.fraction_with_keyword > best.fraction_with_keyword { s } else { best })
    }
}

/// Keyword counts for completion texts.
pub fn score_texts(texts: &[String], keywords: &[String]) -> (Vec<usize>, f64, f64) {
    let set = corpus::keyword_set(keywords);
    let counts: Vec<usize> = texts.iter().map(|t| corpus::count_keywords(t, &set)).collect();
    let n = counts.len().max(1) as f64;
    let mean_count = counts.iter().sum::<usize>() as f64 / n;
    let fraction = counts.iter().filter(|&&c| c > 0).count() as f64 / n;
    (counts, mean_count, fraction)
}

fn score_completions(
    engine: &Engine,
    prompt: &str,
    params: &GenerationParams,
    vector: Option<&SteeringVector>,
    n: usize,
    keywords: &[String],
) -> Result<(Vec<usize>, f64, f64)> {
    let texts: Vec<String> = sampler::generate_batch(engine, prompt, params, vector, n)?
        .into_iter()
        .map(|c| c.text)
        .collect();
    Ok(score_texts(&texts, keywords))
}

#[allow(clippy::too_many_arguments)]
pub fn generation_sweep(
    engine: &Engine,
    prompt: &str,
    pair: &ContrastPair,
    coefficient: f32,
    layers: &[usize],
    n: usize,
    params: &GenerationParams,
    keywords: &[String],
) -> Result<SweepReport> {
    if n == 0 {
        return Err(Error::Validation("n must be >= 1".into()));
    }
    params.validate()?;
    let (counts, mean_count, fraction) = score_completions(engine, prompt, params, None, n, keywords)?;
    let baseline = GenerationScore {
        layer: None,
        coefficient: 0.0,
        dim_fraction: None,
        n,
        mean_count,
        fraction_with_keyword: fraction,
        counts,
    };
    let steered = layers
        .iter()
        .map(|&layer| {
            let spec = SteeringSpec::new(pair.clone(), layer, coefficient);
            let v = steering::build_steering_vector(engine, &spec)?;
            let (counts, mean_count, fraction) = score_completions(engine, prompt, params, Some(&v), n, keywords)?;
            Ok(GenerationScore {
                layer: Some(layer),
                coefficient,
                dim_fraction: None,
                n,
                mean_count,
                fraction_with_keyword: fraction,
                counts,
            })
        })
        .collect::<Result<_>>()?;
    Ok(SweepReport {
        report_version: REPORT_VERSION,
        prompt: prompt.into(),
        params: params.clone(),
        keywords: keywords.to_vec(),
        baseline,
        steered,
    })
}

/// Partial ActAdd: keep the first `round(f · d_model)` coordinates for each
/// fraction `f`.
pub fn partial_sweep(
    engine: &Engine,
    prompt: &str,
    spec: &SteeringSpec,
    fractions: &[f64],
    n: usize,
    params: &GenerationParams,
    keywords: &[String],
) -> Result<SweepReport> {
    if n == 0 {
        return Err(Error::Validation("n must be >= 1".into()));
    }
    if let Some(f) = fractions.iter().find(|f| !(0.0..=1.0).contains(*f)) {
        return Err(Error::Validation(format!("fraction {f} outside [0, 1]")));
    }
    params.validate()?;
    let d_model = engine.model.config.d_model;
    let full = steering::build_steering_vector(engine, &SteeringSpec { dim_cutoff: None, ..spec.clone() })?;
    let (counts, mean_count, fraction) = score_completions(engine, prompt, params, None, n, keywords)?;
    let baseline = GenerationScore {
        layer: None,
        coefficient: 0.0,
        dim_fraction: None,
        n,
        mean_count,
        fraction_with_keyword: fraction,
        counts,
    };
    let steered = fractions
        .iter()
        .map(|&f| {
            let v = steering::restrict_dims(&full, cutoff_for(f, d_model));
            let (counts, mean_count, fraction) = score_completions(engine, prompt, params, Some(&v), n, keywords)?;
            Ok(GenerationScore {
                layer: Some(spec.layer),
                coefficient: spec.coefficient,
                dim_fraction: Some(f),
                n,
                mean_count,
                fraction_with_keyword: fraction,
                counts,
            })
        })
        .collect::<Result<_>>()?;
    Ok(SweepReport {
        report_version: REPORT_VERSION,
        prompt: prompt.into(),
        params: params.clone(),
        keywords: keywords.to_vec(),
        baseline,
        steered,
    })
}

pub fn cutoff_for(fraction: f64, d_model: usize) -> usize {
    ((fraction * d_model as f64).round() as usize).min(d_model)
}

/// Spearman rank correlation with average ranks for ties. `None` when
/// either side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for k in i..=j {
                r[idx[k]] = avg;
            }
            i = j + 1;
        }
        r
    }
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let mx = rx.iter().sum::<f64>() / rx.len() as f64;
    let my = ry.iter().sum::<f64>() / ry.len() as f64;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    (vx > 0.0 && vy > 0.0).then(|| cov / (vx * vy).sqrt())
}

/// Zero-based rank of `target` in `row`: descending logit, ties by id.
pub fn target_rank(row: &[f32], target: u32) -> usize {
    let t = row[target as usize];
    row.iter()
        .enumerate()
        .filter(|&(i, &v)| v > t || (v == t && (i as u32) < target))
        .count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PAtKReport {
    pub report_version: u32,
    pub ks: Vec<usize>,
    pub items: usize,
    pub dropped: usize,
    pub unsteered: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steered: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steering: Option<VectorSummary>,
    pub ranks_unsteered: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ranks_steered: Option<Vec<usize>>,
}

fn final_rank(engine: &Engine, prompt: &str, target: u32, vector: Option<&SteeringVector>) -> Result<usize> {
    let seq = engine.encode_prompt(prompt);
    let hooks = vector.map_or_else(HookSet::new, |v| v.hooks(seq.len()));
    let logits = engine.logits(&seq, &hooks)?;
    Ok(target_rank(logits.row(seq.len() - 1), target))
}

fn p_at(ranks: &[usize], k: usize) -> f64 {
    ranks.iter().filter(|&&r| r < k).count() as f64 / ranks.len() as f64
}

pub fn p_at_k(
    engine: &Engine,
    set: &KnowledgeSet,
    steering: Option<&SteeringVector>,
    ks: &[usize],
) -> Result<PAtKReport> {
    if set.items.is_empty() {
        return Err(Error::Validation("knowledge set has no single-token items".into()));
    }
    if let Some(v) = steering {
        v.check_model(&engine.model.config)?;
    }
    let ranks = |v: Option<&SteeringVector>| -> Result<Vec<usize>> {
        set.items
            .par_iter()
            .map(|it| final_rank(engine, &it.prompt, it.target_id, v))
            .collect()
    };
    let base = ranks(None)?;
    let steered = steering.map(|v| ranks(Some(v))).transpose()?;
    Ok(PAtKReport {
        report_version: REPORT_VERSION,
        ks: ks.to_vec(),
        items: set.items.len(),
        dropped: set.dropped,
        unsteered: ks.iter().map(|&k| p_at(&base, k)).collect(),
        steered: steered.as_ref().map(|r| ks.iter().map(|&k| p_at(r, k)).collect()),
        steering: steering.map(Into::into),
        ranks_unsteered: base,
        ranks_steered: steered,
    })
}

/// `KL(P ‖ Q)` between the softmaxes of two logit rows, clamped at 0.
pub fn kl_divergence(p_logits: &[f32], q_logits: &[f32]) -> f64 {
    let lp = log_softmax(p_logits);
    let lq = log_softmax(q_logits);
    lp.iter()
        .zip(&lq)
        .map(|(a, b)| if a.is_finite() { a.exp() * (a - b) } else { 0.0 })
        .sum::<f64>()
        .max(0.0)
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlEntry {
    pub prompt: String,
    pub kl_a: f64,
    pub kl_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KlReport {
    pub report_version: u32,
    pub vector_a: VectorSummary,
    pub vector_b: VectorSummary,
    pub prompts: Vec<KlEntry>,
    pub median_a: f64,
    pub median_b: f64,
}

pub fn kl_shift(
    engine: &Engine,
    prompts: &[String],
    vec_a: &SteeringVector,
    vec_b: &SteeringVector,
) -> Result<KlReport> {
    if prompts.is_empty() {
        return Err(Error::Validation("kl_shift needs at least one prompt".into()));
    }
    vec_a.check_model(&engine.model.config)?;
    vec_b.check_model(&engine.model.config)?;
    if vec_a.delta.cols != vec_b.delta.cols || vec_a.layer != vec_b.layer {
        return Err(Error::Validation("vectors must share layer and width".into()));
    }
    let entries: Vec<KlEntry> = prompts
        .par_iter()
        .map(|p| {
            let seq = engine.encode_prompt(p);
            let last = seq.len() - 1;
            let base = engine.logits(&seq, &HookSet::new())?;
            let a = engine.logits(&seq, &vec_a.hooks(seq.len()))?;
            let b = engine.logits(&seq, &vec_b.hooks(seq.len()))?;
            Ok(KlEntry {
                prompt: p.clone(),
                kl_a: kl_divergence(base.row(last), a.row(last)),
                kl_b: kl_divergence(base.row(last), b.row(last)),
            })
        })
        .collect::<Result<_>>()?;
    let a: Vec<f64> = entries.iter().map(|e| e.kl_a).collect();
    let b: Vec<f64> = entries.iter().map(|e| e.kl_b).collect();
    Ok(KlReport {
        report_version: REPORT_VERSION,
        vector_a: vec_a.into(),
        vector_b: vec_b.into(),
        median_a: median(&a).expect("non-empty"),
        median_b: median(&b).expect("non-empty"),
        prompts: entries,
    })
}

/// One timed unit of work for the premium benchmark.
pub trait BenchWorkload: Sync {
    fn name(&self) -> String;
    fn vocab_size(&self) -> usize;
    /// Plain forward passes over the batch.
    fn baseline(&self, batch: &[TokenSequence]) -> Result<()>;
    /// Contrast-pair passes to build the vector, then injected passes.
    fn actadd(&self, batch: &[TokenSequence]) -> Result<()>;
}

/// Real-model workload: the contrast pair "This is a test prompt." vs ""
/// injected at `layer`.
pub struct EngineWorkload<'a> {
    pub name: String,
    pub engine: &'a Engine,
    pub spec: SteeringSpec,
}

impl<'a> EngineWorkload<'a> {
    pub fn new(name: impl Into<String>, engine: &'a Engine) -> Self {
        let layer = 6.min(engine.model.config.n_layers - 1);
        let pair = ContrastPair::new("This is a test prompt.", "").expect("non-empty pair");
        Self {
            name: name.into(),
            engine,
            spec: SteeringSpec::new(pair, layer, 1.0),
        }
    }
}

impl BenchWorkload for EngineWorkload<'_> {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn vocab_size(&self) -> usize {
        self.engine.vocab.len()
    }

    fn baseline(&self, batch: &[TokenSequence]) -> Result<()> {
        batch
            .par_iter()
            .try_for_each(|s| self.engine.logits(s, &HookSet::new()).map(drop))
    }

    fn actadd(&self, batch: &[TokenSequence]) -> Result<()> {
        let v = steering::build_steering_vector(self.engine, &self.spec)?;
        batch
            .par_iter()
            .try_for_each(|s| self.engine.logits(s, &v.hooks(s.len())).map(drop))
    }
}

/// Stand-in with fixed delays, for validating the timing harness.
pub struct SleepWorkload {
    pub base: Duration,
    pub overhead: Duration,
}

impl BenchWorkload for SleepWorkload {
    fn name(&self) -> String {
        format!("sleep-stub({:?}+{:?})", self.base, self.overhead)
    }

    fn vocab_size(&self) -> usize {
        256
    }

    fn baseline(&self, _batch: &[TokenSequence]) -> Result<()> {
        wait_for(self.base);
        Ok(())
    }

    fn actadd(&self, _batch: &[TokenSequence]) -> Result<()> {
        wait_for(self.base + self.overhead);
        Ok(())
    }
}

/// Sleep most of `d`, then spin to the deadline; plain `sleep` overshoots
/// by scheduler latency.
fn wait_for(d: Duration) {
    let deadline = Instant::now() + d;
    if let Some(coarse) = d.checked_sub(Duration::from_millis(2)) {
        std::thread::sleep(coarse);
    }
    while Instant::now() < deadline {
        std::hint::spin_loop();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PremiumConfig {
    pub reps: usize,
    pub warmup: usize,
    pub seeds: Vec<u64>,
    pub batch: usize,
    pub seq_len: usize,
}

impl Default for PremiumConfig {
    /// 100 timed repetitions per seed over 10 seeds, batch 32 × 64.
    fn default() -> Self {
        Self {
            reps: 100,
            warmup: 2,
            seeds: (0..10).collect(),
            batch: 32,
            seq_len: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PremiumEntry {
    pub model: String,
    pub mean_baseline_s: f64,
    pub mean_actadd_s: f64,
    pub median_baseline_s: f64,
    pub median_actadd_s: f64,
    /// Mean over seeds of `t̄_ActAdd / t̄_baseline − 1`.
    pub premium: f64,
    pub premium_median: f64,
    pub per_seed: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PremiumReport {
    pub report_version: u32,
    pub config: PremiumConfig,
    pub entries: Vec<PremiumEntry>,
    pub warnings: Vec<String>,
}

fn random_batch(seed: u64, batch: usize, seq_len: usize, vocab: usize) -> Vec<TokenSequence> {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    (0..batch)
        .map(|_| TokenSequence::new((0..seq_len).map(|_| rng.gen_range(0..vocab as u32)).collect(), false))
        .collect()
}

fn timed(f: impl FnOnce() -> Result<()>) -> Result<f64> {
    let t = Instant::now();
    f()?;
    Ok(t.elapsed().as_secs_f64())
}

pub fn inference_premium(workloads: &[&dyn BenchWorkload], config: &PremiumConfig) -> Result<PremiumReport> {
    if config.reps == 0 || config.seeds.is_empty() || config.batch == 0 || config.seq_len == 0 {
        return Err(Error::Validation("reps, seeds, batch and seq_len must be non-empty".into()));
    }
    if config.warmup < 2 {
        return Err(Error::Validation("at least 2 warmup passes are required".into()));
    }
    let mut entries = Vec::new();
    let mut warnings = Vec::new();
    for w in workloads {
        let (mut all_base, mut all_act, mut per_seed) = (Vec::new(), Vec::new(), Vec::new());
        for &seed in &config.seeds {
            let batch = random_batch(seed, config.batch, config.seq_len, w.vocab_size());
            for _ in 0..config.warmup {
                w.baseline(&batch)?;
                w.actadd(&batch)?;
            }
            let (mut base, mut act) = (Vec::new(), Vec::new());
            for _ in 0..config.reps {
                base.push(timed(|| w.baseline(&batch))?);
                act.push(timed(|| w.actadd(&batch))?);
            }
            let (mb, ma) = (mean(base.iter().copied()).unwrap(), mean(act.iter().copied()).unwrap());
            per_seed.push(ma / mb - 1.0);
            all_base.extend(base);
            all_act.extend(act);
        }
        let mean_baseline_s = mean(all_base.iter().copied()).unwrap();
        if mean_baseline_s < 1e-3 {
            let msg = format!("{}: mean pass {mean_baseline_s:.2e}s is below 1 ms; timer resolution may dominate", w.name());
            log::warn!("{msg}");
            warnings.push(msg);
        }
        let median_baseline_s = median(&all_base).unwrap();
        let median_actadd_s = median(&all_act).unwrap();
        entries.push(PremiumEntry {
            model: w.name(),
            mean_baseline_s,
            mean_actadd_s: mean(all_act.iter().copied()).unwrap(),
            median_baseline_s,
            median_actadd_s,
            premium: mean(per_seed.iter().copied()).unwrap(),
            premium_median: median_actadd_s / median_baseline_s - 1.0,
            per_seed,
        });
    }
    Ok(PremiumReport {
        report_version: REPORT_VERSION,
        config: config.clone(),
        entries,
        warnings,
    })
}
