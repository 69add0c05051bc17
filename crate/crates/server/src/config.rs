use std::path::{Path, PathBuf};

use actadd_core::{BpeVocab, Engine, GenerationParams, Model};
use serde::{Deserialize, Serialize};

use crate::error::ServiceError;

/// Service settings. Precedence, lowest first: built-in defaults, the JSON
/// config file, `ACTADD_*` environment variables, command-line flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    /// AAWF weight file, or `tiny` / `tiny:<seed>` for a random test model.
    pub model: Option<String>,
    /// Defaults to `vocab.json` next to the weight file.
    pub vocab: Option<PathBuf>,
    /// Defaults to `merges.txt` next to the weight file.
    pub merges: Option<PathBuf>,
    pub bind: String,
    pub max_concurrent: usize,
    /// Upper bound on `n_completions` per request.
    pub max_completions: usize,
    pub defaults: GenerationParams,
    pub vector_cache_dir: Option<PathBuf>,
    pub cors_origins: Vec<String>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            model: None,
            vocab: None,
            merges: None,
            bind: "127.0.0.1:8080".into(),
            max_concurrent: 4,
            max_completions: 64,
            defaults: GenerationParams::default(),
            vector_cache_dir: None,
            cors_origins: vec!["http://localhost:5173".into(), "http://127.0.0.1:5173".into()],
        }
    }
}

impl ServiceConfig {
    pub fn from_file(path: &Path) -> Result<Self, ServiceError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ServiceError::field("config", format!("cannot read {}: {e}", path.display())))?;
        let mut de = serde_json::Deserializer::from_str(&text);
        serde_path_to_error::deserialize(&mut de).map_err(|e| {
            let field = format!("config.{}", e.path());
            ServiceError::field(field, e.into_inner().to_string())
        })
    }

    pub fn validate(&self) -> Result<(), ServiceError> {
        if self.max_concurrent < 1 {
            return Err(ServiceError::field("max_concurrent", "must be >= 1"));
        }
        if self.max_completions < 1 {
            return Err(ServiceError::field("max_completions", "must be >= 1"));
        }
        self.defaults
            .validate()
            .map_err(|e| ServiceError::field("defaults", e.to_string()))
    }

    pub fn load_engine(&self) -> Result<Engine, ServiceError> {
        let Some(model) = self.model.as_deref() else {
            return Err(ServiceError::field(
                "model",
                "no model configured; pass --model or set ACTADD_MODEL",
            ));
        };
        if let Some(seed) = model.strip_prefix("tiny") {
            let seed = match seed.strip_prefix(':') {
                Some(s) => s
                    .parse()
                    .map_err(|_| ServiceError::field("model", format!("bad tiny seed `{s}`")))?,
                None if seed.is_empty() => 0,
                None => return self.load_file(Path::new(model)),
            };
            return Ok(Engine::tiny(seed));
        }
        self.load_file(Path::new(model))
    }

    fn load_file(&self, path: &Path) -> Result<Engine, ServiceError> {
        let dir = path.parent().unwrap_or(Path::new("."));
        let vocab = self.vocab.clone().unwrap_or_else(|| dir.join("vocab.json"));
        let merges = self.merges.clone().unwrap_or_else(|| dir.join("merges.txt"));
        let vocab = BpeVocab::load(&vocab, &merges)?;
        let model = Model::load(path)?;
        Ok(Engine::new(model, vocab)?)
    }
}
