//! Request types and handlers shared by the CLI and the HTTP API. Both front
//! ends serialize the same report structs through [`Outcome`], so their
//! report JSON is byte-identical for identical inputs.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};
use std::time::Duration;

use actadd_core::eval::{self, BenchWorkload, EngineWorkload, PremiumConfig, SleepWorkload};
use actadd_core::steering::{self, NormProfile};
use actadd_core::{aawf, corpus, sampler};
use actadd_core::{ContrastPair, Engine, GenerationParams, ModelConfig, SteeringSpec, SteeringVector};
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use sha2::{Digest, Sha256};

use crate::config::ServiceConfig;
use crate::error::ServiceError;

pub const REPORT_VERSION: u32 = 1;
pub const DEFAULT_PLUS: &str = " weddings";
pub const DEFAULT_MINUS: &str = " ";
pub const DEFAULT_KS: [usize; 4] = [1, 5, 10, 50];

type SResult<T> = Result<T, ServiceError>;

/// A finished report plus the bits the front ends print around it.
#[derive(Debug)]
pub struct Outcome {
    /// Compact JSON of the report struct.
    pub report: Box<RawValue>,
    /// Seed actually used, when the operation samples.
    pub seed: Option<u64>,
    /// One line for humans.
    pub summary: String,
}

impl Outcome {
    fn new<T: Serialize>(report: &T, seed: Option<u64>, summary: String) -> SResult<Self> {
        Ok(Self {
            report: RawValue::from_string(serde_json::to_string(report)?)?,
            seed,
            summary,
        })
    }
}

fn one() -> usize {
    1
}

fn default_alignment() -> usize {
    1
}

/// Generation settings where every field falls back to the service
/// defaults. A missing seed is drawn at random and echoed back.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamsInput {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub top_p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frequency_penalty: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_new_tokens: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ParamsInput {
    pub fn resolve(&self, defaults: &GenerationParams) -> SResult<GenerationParams> {
        let p = GenerationParams {
            temperature: self.temperature.unwrap_or(defaults.temperature),
            top_p: self.top_p.unwrap_or(defaults.top_p),
            frequency_penalty: self.frequency_penalty.unwrap_or(defaults.frequency_penalty),
            max_new_tokens: self.max_new_tokens.unwrap_or(defaults.max_new_tokens),
            seed: self.seed.unwrap_or_else(|| rand::random::<u32>() as u64),
        };
        if let Err(e) = p.validate() {
            let msg = e.to_string();
            let field = ["temperature", "top_p", "frequency_penalty"]
                .into_iter()
                .find(|f| msg.contains(f))
                .unwrap_or("params");
            return Err(ServiceError::field(format!("params.{field}"), msg));
        }
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairInput {
    pub p_plus: String,
    pub p_minus: String,
}

impl Default for PairInput {
    fn default() -> Self {
        Self {
            p_plus: DEFAULT_PLUS.into(),
            p_minus: DEFAULT_MINUS.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VectorSpecInput {
    pub pair: PairInput,
    pub layer: usize,
    pub coefficient: f32,
    #[serde(default = "default_alignment")]
    pub alignment: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim_cutoff: Option<usize>,
}

impl VectorSpecInput {
    /// The wedding vector at layer 6 (or the last layer of shallower models).
    pub fn wedding(config: &ModelConfig, coefficient: f32) -> Self {
        Self {
            pair: PairInput::default(),
            layer: 6.min(config.n_layers - 1),
            coefficient,
            alignment: 1,
            dim_cutoff: None,
        }
    }

    pub fn to_spec(&self, config: &ModelConfig) -> SResult<SteeringSpec> {
        let pair = ContrastPair::new(&self.pair.p_plus, &self.pair.p_minus)
            .map_err(|e| ServiceError::field("pair", e.to_string()))?;
        let spec = SteeringSpec {
            pair,
            layer: self.layer,
            coefficient: self.coefficient,
            alignment: self.alignment,
            dim_cutoff: self.dim_cutoff,
        };
        if let Err(e) = spec.validate(config) {
            let msg = e.to_string();
            let field = ["dim_cutoff", "layer", "alignment", "coefficient"]
                .into_iter()
                .find(|f| msg.contains(f))
                .unwrap_or("spec");
            return Err(ServiceError::field(field, msg));
        }
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VectorId {
    pub id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VectorFile {
    pub path: PathBuf,
}

/// Which steering vector an evaluation uses: a cached id, an exported
/// file, or a spec to build.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VectorRef {
    Id(VectorId),
    File(VectorFile),
    Spec(VectorSpecInput),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateRequest {
    pub prompt: String,
    #[serde(default)]
    pub params: ParamsInput,
    #[serde(default = "one")]
    pub n_completions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteerRequest {
    pub prompt: String,
    pub pair: PairInput,
    pub layer: usize,
    pub coefficient: f32,
    #[serde(default = "default_alignment")]
    pub alignment: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim_cutoff: Option<usize>,
    #[serde(default)]
    pub params: ParamsInput,
    #[serde(default = "one")]
    pub n_completions: usize,
    /// Words scored and highlighted in the report; defaults to the wedding list.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keywords: Option<Vec<String>>,
}

impl SteerRequest {
    pub fn vector_spec(&self) -> VectorSpecInput {
        VectorSpecInput {
            pair: self.pair.clone(),
            layer: self.layer,
            coefficient: self.coefficient,
            alignment: self.alignment,
            dim_cutoff: self.dim_cutoff,
        }
    }
}

fn default_bin_width() -> f64 {
    corpus::DEFAULT_BIN_WIDTH
}

fn default_min_count() -> usize {
    corpus::DEFAULT_MIN_COUNT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerplexityRequest {
    /// File, directory or glob.
    pub corpus: String,
    #[serde(default = "default_bin_width")]
    pub bin_width: f64,
    #[serde(default = "default_min_count")]
    pub min_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keywords: Option<Vec<String>>,
    /// Two bins (unrelated / related) split at this frequency instead of
    /// fixed-width bins.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub related_threshold: Option<f64>,
    /// Defaults to the wedding vector with c = 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vector: Option<VectorRef>,
    /// When set, score the prompting baseline with this prefix instead of
    /// ActAdd.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prefix: Option<String>,
}

fn default_min_instances() -> usize {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftRequest {
    pub corpus: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vector: Option<VectorRef>,
    #[serde(default = "default_min_instances")]
    pub min_instances: usize,
}

fn default_ks() -> Vec<usize> {
    DEFAULT_KS.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PkRequest {
    /// JSONL file of `{"prompt", "target"}` records.
    pub knowledge: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vector: Option<VectorRef>,
    #[serde(default = "default_ks")]
    pub ks: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KlRequest {
    pub prompts: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vector: Option<VectorRef>,
    /// Seed of the norm-matched random control vector.
    #[serde(default)]
    pub random_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepLayersRequest {
    pub prompt: String,
    #[serde(default)]
    pub pair: PairInput,
    #[serde(default = "unit_coefficient")]
    pub coefficient: f32,
    /// Defaults to every layer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layers: Option<Vec<usize>>,
    pub n: usize,
    #[serde(default)]
    pub params: ParamsInput,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keywords: Option<Vec<String>>,
}

fn unit_coefficient() -> f32 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPartialRequest {
    pub prompt: String,
    pub spec: VectorSpecInput,
    pub fractions: Vec<f64>,
    pub n: usize,
    #[serde(default)]
    pub params: ParamsInput,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keywords: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PremiumRequest {
    #[serde(default)]
    pub config: PremiumConfig,
    /// Time the configured model.
    #[serde(default = "yes")]
    pub model: bool,
    /// Also time a sleep stub with these `(base, overhead)` delays in ms.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stub_ms: Option<(u64, u64)>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionOut {
    pub seed: u64,
    pub text: String,
    pub tokens: Vec<u32>,
}

impl From<sampler::Completion> for CompletionOut {
    fn from(c: sampler::Completion) -> Self {
        Self {
            seed: c.seed,
            text: c.text,
            tokens: c.generated.ids,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateReport {
    pub report_version: u32,
    pub prompt: String,
    pub prompt_tokens: Vec<u32>,
    pub params: GenerationParams,
    pub completions: Vec<CompletionOut>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorInfo {
    pub id: String,
    pub spec: SteeringSpec,
    pub model_hash: String,
    pub rows: usize,
    pub modified_positions: [usize; 2],
    pub norms: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteerReport {
    pub report_version: u32,
    pub prompt: String,
    pub prompt_tokens: Vec<u32>,
    pub params: GenerationParams,
    pub vector: VectorInfo,
    pub baseline: Vec<CompletionOut>,
    pub steered: Vec<CompletionOut>,
    /// Every steered completion equals its baseline counterpart.
    pub identical: bool,
    pub scores: SteerScores,
}

/// Keyword scores of one side of a steer comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeywordScore {
    pub counts: Vec<usize>,
    /// Per completion, character ranges of each keyword occurrence.
    pub spans: Vec<Vec<[usize; 2]>>,
    pub mean_count: f64,
    /// Fraction of completions with at least one keyword.
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteerScores {
    pub keywords: Vec<String>,
    pub baseline: KeywordScore,
    pub steered: KeywordScore,
}

impl KeywordScore {
    fn new(completions: &[CompletionOut], keywords: &[String]) -> Self {
        let texts: Vec<String> = completions.iter().map(|c| c.text.clone()).collect();
        let (counts, mean_count, fraction) = eval::score_texts(&texts, keywords);
        let set = corpus::keyword_set(keywords);
        let spans = texts.iter().map(|t| corpus::keyword_spans(t, &set)).collect();
        Self {
            counts,
            spans,
            mean_count,
            fraction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormProfileReport {
    pub report_version: u32,
    pub vector_id: String,
    pub profile: NormProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub report_version: u32,
    pub model: String,
    pub model_hash: String,
    pub config: ModelConfig,
    pub tokenizer_entries: usize,
    pub max_completions: usize,
    pub max_concurrent: usize,
    pub defaults: GenerationParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub report_version: u32,
    pub path: PathBuf,
    pub kind: String,
    pub tensors: usize,
    pub parameters: usize,
    pub file_hash: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config: Option<ModelConfig>,
}

pub struct Service {
    pub engine: Engine,
    pub config: ServiceConfig,
    vectors: RwLock<HashMap<String, Arc<SteeringVector>>>,
}

impl Service {
    pub fn new(config: ServiceConfig) -> SResult<Self> {
        config.validate()?;
        let engine = config.load_engine()?;
        Ok(Self::with_engine(engine, config))
    }

    pub fn with_engine(engine: Engine, config: ServiceConfig) -> Self {
        Self {
            engine,
            config,
            vectors: RwLock::new(HashMap::new()),
        }
    }

    fn model_config(&self) -> &ModelConfig {
        &self.engine.model.config
    }

    fn check_prompt(prompt: &str) -> SResult<()> {
        if prompt.is_empty() {
            return Err(ServiceError::field("prompt", "must not be empty"));
        }
        Ok(())
    }

    fn check_n(&self, n: usize, field: &str) -> SResult<()> {
        if n == 0 || n > self.config.max_completions {
            return Err(ServiceError::field(
                field,
                format!("must be in 1..={}", self.config.max_completions),
            ));
        }
        Ok(())
    }

    pub fn model_info(&self) -> SResult<Outcome> {
        let info = ModelInfo {
            report_version: REPORT_VERSION,
            model: self.config.model.clone().unwrap_or_default(),
            model_hash: self.engine.model.hash.clone(),
            config: self.model_config().clone(),
            tokenizer_entries: self.engine.vocab.len(),
            max_completions: self.config.max_completions,
            max_concurrent: self.config.max_concurrent,
            defaults: self.config.defaults.clone(),
        };
        let summary = format!(
            "{} layers, d_model {}, vocab {}",
            info.config.n_layers, info.config.d_model, info.config.vocab_size
        );
        Outcome::new(&info, None, summary)
    }

    pub fn generate(&self, req: &GenerateRequest) -> SResult<Outcome> {
        Self::check_prompt(&req.prompt)?;
        self.check_n(req.n_completions, "n_completions")?;
        let params = req.params.resolve(&self.config.defaults)?;
        let batch = sampler::generate_batch(&self.engine, &req.prompt, &params, None, req.n_completions)?;
        let report = GenerateReport {
            report_version: REPORT_VERSION,
            prompt: req.prompt.clone(),
            prompt_tokens: batch[0].prompt.ids.clone(),
            params: params.clone(),
            completions: batch.into_iter().map(Into::into).collect(),
        };
        let summary = format!("{} completion(s), seed {}", report.completions.len(), params.seed);
        Outcome::new(&report, Some(params.seed), summary)
    }

    pub fn steer(&self, req: &SteerRequest) -> SResult<Outcome> {
        Self::check_prompt(&req.prompt)?;
        self.check_n(req.n_completions, "n_completions")?;
        let (info, vector) = self.vector_for_spec(&req.vector_spec())?;
        let params = req.params.resolve(&self.config.defaults)?;
        let n = req.n_completions;
        let baseline = sampler::generate_batch(&self.engine, &req.prompt, &params, None, n)?;
        let steered = sampler::generate_batch(&self.engine, &req.prompt, &params, Some(&vector), n)?;
        let prompt_tokens = baseline[0].prompt.ids.clone();
        let baseline: Vec<CompletionOut> = baseline.into_iter().map(Into::into).collect();
        let steered: Vec<CompletionOut> = steered.into_iter().map(Into::into).collect();
        let identical = baseline == steered;
        let keywords = keywords_or_default(req.keywords.as_deref());
        let scores = SteerScores {
            baseline: KeywordScore::new(&baseline, &keywords),
            steered: KeywordScore::new(&steered, &keywords),
            keywords,
        };
        let report = SteerReport {
            report_version: REPORT_VERSION,
            prompt: req.prompt.clone(),
            prompt_tokens,
            params: params.clone(),
            vector: info,
            baseline,
            steered,
            identical,
            scores,
        };
        let summary = format!(
            "{n} baseline + {n} steered completion(s), seed {}, layer {}, c={}{}",
            params.seed,
            req.layer,
            req.coefficient,
            if identical { ", identical output" } else { "" }
        );
        Outcome::new(&report, Some(params.seed), summary)
    }

    /// Cache key: sha256 over the spec and the model hash.
    pub fn vector_id(&self, spec: &SteeringSpec) -> SResult<String> {
        let mut h = Sha256::new();
        h.update(serde_json::to_vec(spec)?);
        h.update(self.engine.model.hash.as_bytes());
        Ok(hex::encode(&h.finalize()[..8]))
    }

    fn vector_info(&self, id: String, spec: SteeringSpec, v: &SteeringVector) -> VectorInfo {
        let m = v.modified_positions();
        VectorInfo {
            id,
            spec,
            model_hash: self.engine.model.hash.clone(),
            rows: v.rows(),
            modified_positions: [m.start, m.end],
            norms: v.norms(),
        }
    }

    fn cache_path(&self, id: &str) -> Option<PathBuf> {
        self.config.vector_cache_dir.as_ref().map(|d| d.join(format!("{id}.aawf")))
    }

    /// Build (or fetch from cache) the vector for a spec.
    pub fn vector_for_spec(&self, input: &VectorSpecInput) -> SResult<(VectorInfo, Arc<SteeringVector>)> {
        let spec = input.to_spec(self.model_config())?;
        let id = self.vector_id(&spec)?;
        if let Some(v) = self.vectors.read().expect("vector cache lock").get(&id) {
            return Ok((self.vector_info(id.clone(), spec, v), v.clone()));
        }
        let v = Arc::new(steering::build_steering_vector(&self.engine, &spec)?);
        if let Some(path) = self.cache_path(&id) {
            if !path.exists() {
                std::fs::create_dir_all(path.parent().expect("cache file has a parent"))
                    .map_err(|e| ServiceError::Internal(format!("vector cache: {e}")))?;
                v.export(&path)?;
            }
        }
        self.vectors.write().expect("vector cache lock").insert(id.clone(), v.clone());
        Ok((self.vector_info(id, spec, &v), v))
    }

    pub fn vector_by_id(&self, id: &str) -> SResult<Arc<SteeringVector>> {
        if let Some(v) = self.vectors.read().expect("vector cache lock").get(id) {
            return Ok(v.clone());
        }
        let valid = id.len() == 16 && id.bytes().all(|b| b.is_ascii_hexdigit());
        match self.cache_path(id) {
            Some(path) if valid && path.exists() => {
                let v = Arc::new(SteeringVector::import(&path)?);
                v.check_model(self.model_config())?;
                self.vectors.write().expect("vector cache lock").insert(id.into(), v.clone());
                Ok(v)
            }
            _ => Err(ServiceError::NotFound(format!("no steering vector with id `{id}`"))),
        }
    }

    pub fn resolve_vector(&self, r: Option<&VectorRef>) -> SResult<Arc<SteeringVector>> {
        match r {
            None => Ok(self.vector_for_spec(&VectorSpecInput::wedding(self.model_config(), 1.0))?.1),
            Some(VectorRef::Spec(s)) => Ok(self.vector_for_spec(s)?.1),
            Some(VectorRef::Id(VectorId { id })) => self.vector_by_id(id),
            Some(VectorRef::File(VectorFile { path })) => {
                let v = SteeringVector::import(path).map_err(|e| ServiceError::field("vector.path", e.to_string()))?;
                v.check_model(self.model_config())
                    .map_err(|e| ServiceError::field("vector.path", e.to_string()))?;
                Ok(Arc::new(v))
            }
        }
    }

    pub fn build_vector(&self, input: &VectorSpecInput) -> SResult<Outcome> {
        let (info, _) = self.vector_for_spec(input)?;
        let summary = format!("vector {} ({} rows, layer {})", info.id, info.rows, info.spec.layer);
        Outcome::new(&info, None, summary)
    }

    pub fn export_vector(&self, input: &VectorSpecInput, out: &Path) -> SResult<Outcome> {
        let (info, v) = self.vector_for_spec(input)?;
        v.export(out)?;
        let summary = format!("vector {} written to {}", info.id, out.display());
        Outcome::new(&info, None, summary)
    }

    pub fn norm_profile(&self, id: &str, prompt: &str) -> SResult<Outcome> {
        Self::check_prompt(prompt)?;
        let v = self.vector_by_id(id)?;
        let pair = v
            .pair
            .as_ref()
            .ok_or_else(|| ServiceError::field("id", "vector has no contrast pair to profile"))?;
        let profile = steering::norm_profile(&self.engine, prompt, pair, v.coefficient)?;
        let report = NormProfileReport {
            report_version: REPORT_VERSION,
            vector_id: id.into(),
            profile,
        };
        Outcome::new(&report, None, format!("norm profile over {} layers", self.model_config().n_layers))
    }

    pub fn perplexity(&self, req: &PerplexityRequest) -> SResult<Outcome> {
        if !(req.bin_width > 0.0 && req.bin_width <= 1.0) {
            return Err(ServiceError::field("bin_width", "must be in (0, 1]"));
        }
        let mut docs = load_corpus(&req.corpus)?;
        let keywords = keywords_or_default(req.keywords.as_deref());
        let bins = match req.related_threshold {
            Some(t) => {
                if !(0.0..=1.0).contains(&t) {
                    return Err(ServiceError::field("related_threshold", "must be in [0, 1]"));
                }
                corpus::tag_documents(&mut docs, &keywords);
                corpus::related_split(&docs, t, req.min_count)
            }
            None => corpus::tag_and_bin(&mut docs, &keywords, req.bin_width, req.min_count)?,
        };
        let report = match &req.prefix {
            Some(prefix) => eval::prompting_baseline(&self.engine, &docs, &bins, prefix)?,
            None => {
                let v = self.resolve_vector(req.vector.as_ref())?;
                eval::perplexity_ratio(&self.engine, &docs, &bins, Some(&v))?
            }
        };
        let scored: Vec<String> = report
            .bins
            .iter()
            .filter_map(|b| b.perplexity_ratio.map(|r| format!("{}: {r:.4}", b.label)))
            .collect();
        let summary = format!(
            "{} documents, {} bins scored ({})",
            docs.len(),
            scored.len(),
            scored.join(", ")
        );
        Outcome::new(&report, None, summary)
    }

    pub fn token_shift(&self, req: &ShiftRequest) -> SResult<Outcome> {
        let docs = load_corpus(&req.corpus)?;
        let v = self.resolve_vector(req.vector.as_ref())?;
        let report = eval::token_shift(&self.engine, &docs, &v, req.min_instances)?;
        let summary = format!(
            "{} scored tokens, {} token types kept",
            report.tokens_scored,
            report.tokens.len()
        );
        Outcome::new(&report, None, summary)
    }

    pub fn p_at_k(&self, req: &PkRequest) -> SResult<Outcome> {
        if req.ks.is_empty() || req.ks.contains(&0) {
            return Err(ServiceError::field("ks", "must be a non-empty list of positive integers"));
        }
        let set = corpus::load_knowledge_set(&req.knowledge, &self.engine.vocab)
            .map_err(|e| ServiceError::field("knowledge", e.to_string()))?;
        let v = self.resolve_vector(req.vector.as_ref())?;
        let report = eval::p_at_k(&self.engine, &set, Some(&v), &req.ks)?;
        let summary = format!(
            "{} items ({} dropped); unsteered {:?}, steered {:?}",
            report.items,
            report.dropped,
            report.unsteered,
            report.steered.as_deref().unwrap_or_default()
        );
        Outcome::new(&report, None, summary)
    }

    pub fn kl(&self, req: &KlRequest) -> SResult<Outcome> {
        if req.prompts.is_empty() || req.prompts.iter().any(String::is_empty) {
            return Err(ServiceError::field("prompts", "need at least one non-empty prompt"));
        }
        let v = self.resolve_vector(req.vector.as_ref())?;
        let random = steering::random_matched_vector(&v, req.random_seed);
        let report = eval::kl_shift(&self.engine, &req.prompts, &v, &random)?;
        let summary = format!(
            "median KL: vector {:.4e}, norm-matched random {:.4e}",
            report.median_a, report.median_b
        );
        Outcome::new(&report, None, summary)
    }

    pub fn sweep_layers(&self, req: &SweepLayersRequest) -> SResult<Outcome> {
        Self::check_prompt(&req.prompt)?;
        if req.n == 0 {
            return Err(ServiceError::field("n", "must be >= 1"));
        }
        let n_layers = self.model_config().n_layers;
        let layers = req.layers.clone().unwrap_or_else(|| (0..n_layers).collect());
        if let Some(l) = layers.iter().find(|&&l| l >= n_layers) {
            return Err(ServiceError::field(
                "layers",
                format!("layer {l} out of range; valid layers are 0..={}", n_layers - 1),
            ));
        }
        let pair = ContrastPair::new(&req.pair.p_plus, &req.pair.p_minus)
            .map_err(|e| ServiceError::field("pair", e.to_string()))?;
        let params = req.params.resolve(&self.config.defaults)?;
        let keywords = keywords_or_default(req.keywords.as_deref());
        let report = eval::generation_sweep(
            &self.engine,
            &req.prompt,
            &pair,
            req.coefficient,
            &layers,
            req.n,
            &params,
            &keywords,
        )?;
        let best = report.best().map_or_else(
            || "none".into(),
            |b| format!("layer {} ({:.3})", b.layer.unwrap_or_default(), b.fraction_with_keyword),
        );
        let summary = format!(
            "baseline fraction {:.3}; best {best}",
            report.baseline.fraction_with_keyword
        );
        Outcome::new(&report, Some(params.seed), summary)
    }

    pub fn sweep_partial(&self, req: &SweepPartialRequest) -> SResult<Outcome> {
        Self::check_prompt(&req.prompt)?;
        if req.n == 0 {
            return Err(ServiceError::field("n", "must be >= 1"));
        }
        if req.fractions.is_empty() || req.fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(ServiceError::field("fractions", "need fractions in [0, 1]"));
        }
        let spec = req.spec.to_spec(self.model_config())?;
        let params = req.params.resolve(&self.config.defaults)?;
        let keywords = keywords_or_default(req.keywords.as_deref());
        let report = eval::partial_sweep(&self.engine, &req.prompt, &spec, &req.fractions, req.n, &params, &keywords)?;
        let means: Vec<f64> = report.steered.iter().map(|s| s.mean_count).collect();
        let rho = eval::spearman(&req.fractions, &means);
        let summary = format!("mean keyword counts {means:?}; spearman {rho:?}");
        Outcome::new(&report, Some(params.seed), summary)
    }
}

/// Premium benchmark; `engine` may be absent when only the stub is timed.
pub fn premium(engine: Option<&Engine>, req: &PremiumRequest) -> SResult<Outcome> {
    let stub = req.stub_ms.map(|(base, overhead)| SleepWorkload {
        base: Duration::from_millis(base),
        overhead: Duration::from_millis(overhead),
    });
    let real = match (req.model, engine) {
        (true, Some(e)) => Some(EngineWorkload::new("model", e)),
        (true, None) => return Err(ServiceError::field("model", "no model configured")),
        (false, _) => None,
    };
    let mut workloads: Vec<&dyn BenchWorkload> = Vec::new();
    if let Some(s) = &stub {
        workloads.push(s);
    }
    if let Some(r) = &real {
        workloads.push(r);
    }
    if workloads.is_empty() {
        return Err(ServiceError::field("model", "nothing to time; enable the model or a stub"));
    }
    let report = eval::inference_premium(&workloads, &req.config)?;
    let summary = report
        .entries
        .iter()
        .map(|e| format!("{}: premium {:.4}", e.model, e.premium))
        .collect::<Vec<_>>()
        .join("; ");
    Outcome::new(&report, None, summary)
}

/// Verify an AAWF file's checksums and, for model files, its shapes.
pub fn convert_check(path: &Path) -> SResult<Outcome> {
    let container = aawf::read(path)?;
    let parameters = container.tensors.iter().map(|(r, _)| r.numel()).sum();
    let tensors = container.tensors.len();
    let kind = container.kind.clone();
    let file_hash = container.file_hash.clone();
    let config = if kind == "model" {
        Some(actadd_core::Model::from_container(container)?.config)
    } else {
        None
    };
    let report = CheckReport {
        report_version: REPORT_VERSION,
        path: path.to_path_buf(),
        kind,
        tensors,
        parameters,
        file_hash,
        config,
    };
    let summary = format!("{tensors} tensors verified, sha256 {}", report.file_hash);
    Outcome::new(&report, None, summary)
}

fn load_corpus(pattern: &str) -> SResult<Vec<corpus::Document>> {
    corpus::load_corpus(pattern).map_err(|e| ServiceError::field("corpus", e.to_string()))
}

fn keywords_or_default(k: Option<&[String]>) -> Vec<String> {
    match k {
        Some(k) => k.to_vec(),
        None => corpus::WEDDING_KEYWORDS.iter().map(|s| s.to_string()).collect(),
    }
}
