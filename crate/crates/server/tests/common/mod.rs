#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;

use actadd_core::{BpeVocab, Engine, Model, ModelConfig};
use actadd_server::{Service, ServiceConfig};

pub fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn vocab_paths() -> (PathBuf, PathBuf) {
    let dir = root().join("assets/gpt2");
    (dir.join("vocab.json"), dir.join("merges.txt"))
}

/// Small random model over the full GPT-2 vocabulary.
pub fn small_config() -> ModelConfig {
    ModelConfig {
        n_layers: 4,
        d_model: 32,
        n_heads: 4,
        vocab_size: 50257,
        max_positions: 128,
        layernorm_epsilon: 1e-5,
    }
}

pub struct Fixture {
    pub dir: tempfile::TempDir,
    pub model: PathBuf,
}

impl Fixture {
    pub fn new(seed: u64) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let model = dir.path().join("model.aawf");
        Model::random(small_config(), seed).unwrap().save(&model).unwrap();
        Self { dir, model }
    }

    pub fn config(&self) -> ServiceConfig {
        let (vocab, merges) = vocab_paths();
        ServiceConfig {
            model: Some(self.model.display().to_string()),
            vocab: Some(vocab),
            merges: Some(merges),
            ..ServiceConfig::default()
        }
    }

    pub fn service(&self) -> Service {
        Service::new(self.config()).unwrap()
    }

    pub fn engine(&self) -> Engine {
        let (vocab, merges) = vocab_paths();
        Engine::new(Model::load(&self.model).unwrap(), BpeVocab::load(vocab, merges).unwrap()).unwrap()
    }

    /// Run the CLI with this model; returns (exit code, stdout, stderr).
    pub fn cli(&self, args: &[&str]) -> (i32, String, String) {
        let (vocab, merges) = vocab_paths();
        let mut full: Vec<String> = vec![
            "--model".into(),
            self.model.display().to_string(),
            "--vocab".into(),
            vocab.display().to_string(),
            "--merges".into(),
            merges.display().to_string(),
        ];
        full.extend(args.iter().map(|s| s.to_string()));
        run_cli(&full, &[])
    }

    /// A corpus of the first `n` related and `n` unrelated fixture documents.
    pub fn small_corpus(&self, n: usize) -> PathBuf {
        let path = self.dir.path().join(format!("corpus{n}.jsonl"));
        let mut out = String::new();
        for name in ["related", "unrelated"] {
            let text = std::fs::read_to_string(root().join(format!("fixtures/wedding_corpus/{name}.jsonl"))).unwrap();
            for line in text.lines().take(n) {
                out.push_str(line);
                out.push('\n');
            }
        }
        std::fs::write(&path, out).unwrap();
        path
    }

    pub fn small_knowledge(&self, n: usize) -> PathBuf {
        let path = self.dir.path().join(format!("knowledge{n}.jsonl"));
        let text = std::fs::read_to_string(root().join("fixtures/knowledge.jsonl")).unwrap();
        let lines: Vec<&str> = text.lines().step_by(200 / n).take(n).collect();
        std::fs::write(&path, lines.join("\n")).unwrap();
        path
    }
}

pub fn run_cli(args: &[String], env: &[(&str, &str)]) -> (i32, String, String) {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_actadd"));
    for (k, _) in std::env::vars() {
        if k.starts_with("ACTADD_") {
            cmd.env_remove(k);
        }
    }
    cmd.args(args).envs(env.iter().copied());
    let out = cmd.output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}
