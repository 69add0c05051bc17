use std::ffi::OsString;
use std::path::PathBuf;

use actadd_core::eval::PremiumConfig;
use actadd_core::ModelConfig;
use clap::{Args, Parser, Subcommand};

use crate::config::ServiceConfig;
use crate::error::ServiceError;
use crate::service::{
    self, GenerateRequest, KlRequest, Outcome, PairInput, ParamsInput, PerplexityRequest, PkRequest, PremiumRequest,
    Service, ShiftRequest, SteerRequest, SweepLayersRequest, SweepPartialRequest, VectorFile, VectorRef,
    VectorSpecInput,
};

/// Activation-addition steering: generation, vectors and evaluations.
///
/// Reports go to stdout as JSON, a one-line summary to stderr. Exit status
/// is 0 on success, 2 on invalid input and 1 on runtime failure.
#[derive(Debug, Parser)]
#[command(name = "actadd", version)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// JSON config file; flags and ACTADD_* variables override it.
    #[arg(long, global = true, env = "ACTADD_CONFIG")]
    pub config: Option<PathBuf>,
    /// AAWF weight file, or `tiny[:seed]` for a random test model.
    #[arg(long, global = true, env = "ACTADD_MODEL")]
    pub model: Option<String>,
    #[arg(long, global = true, env = "ACTADD_VOCAB")]
    pub vocab: Option<PathBuf>,
    #[arg(long, global = true, env = "ACTADD_MERGES")]
    pub merges: Option<PathBuf>,
    #[arg(long, global = true, env = "ACTADD_BIND")]
    pub bind: Option<String>,
    #[arg(long, global = true, env = "ACTADD_MAX_CONCURRENT")]
    pub max_concurrent: Option<usize>,
    #[arg(long, global = true, env = "ACTADD_MAX_COMPLETIONS")]
    pub max_completions: Option<usize>,
    #[arg(long, global = true, env = "ACTADD_VECTOR_CACHE_DIR")]
    pub vector_cache_dir: Option<PathBuf>,
    /// Comma-separated origins allowed by CORS (`*` for any).
    #[arg(long, global = true, env = "ACTADD_CORS_ORIGINS", value_delimiter = ',')]
    pub cors_origins: Option<Vec<String>>,
}

impl GlobalArgs {
    pub fn resolve(&self) -> Result<ServiceConfig, ServiceError> {
        let mut c = match &self.config {
            Some(p) => ServiceConfig::from_file(p)?,
            None => ServiceConfig::default(),
        };
        macro_rules! over {
            ($($f:ident),*) => {$(if let Some(v) = &self.$f { c.$f = v.clone().into(); })*};
        }
        over!(model, vocab, merges, vector_cache_dir);
        if let Some(b) = &self.bind {
            c.bind = b.clone();
        }
        if let Some(n) = self.max_concurrent {
            c.max_concurrent = n;
        }
        if let Some(n) = self.max_completions {
            c.max_completions = n;
        }
        if let Some(o) = &self.cors_origins {
            c.cors_origins = o.clone();
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, env = "ACTADD_TEMPERATURE")]
    pub temperature: Option<f64>,
    #[arg(long, env = "ACTADD_TOP_P")]
    pub top_p: Option<f64>,
    #[arg(long, env = "ACTADD_FREQUENCY_PENALTY")]
    pub frequency_penalty: Option<f64>,
    #[arg(long, env = "ACTADD_MAX_NEW_TOKENS")]
    pub max_new_tokens: Option<usize>,
    /// Drawn at random (and reported) when omitted.
    #[arg(long, env = "ACTADD_SEED")]
    pub seed: Option<u64>,
}

impl GenArgs {
    fn params(&self) -> ParamsInput {
        ParamsInput {
            temperature: self.temperature,
            top_p: self.top_p,
            frequency_penalty: self.frequency_penalty,
            max_new_tokens: self.max_new_tokens,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct SpecArgs {
    #[arg(long = "plus", default_value = service::DEFAULT_PLUS, allow_hyphen_values = true)]
    pub p_plus: String,
    #[arg(long = "minus", default_value = service::DEFAULT_MINUS, allow_hyphen_values = true)]
    pub p_minus: String,
    /// Defaults to 6, or the last layer of shallower models.
    #[arg(long)]
    pub layer: Option<usize>,
    #[arg(long = "coef", default_value_t = 1.0, allow_hyphen_values = true)]
    pub coefficient: f32,
    #[arg(long, default_value_t = 1)]
    pub alignment: usize,
    #[arg(long)]
    pub dim_cutoff: Option<usize>,
}

impl SpecArgs {
    fn input(&self, config: &ModelConfig) -> VectorSpecInput {
        VectorSpecInput {
            pair: PairInput {
                p_plus: self.p_plus.clone(),
                p_minus: self.p_minus.clone(),
            },
            layer: self.layer.unwrap_or_else(|| VectorSpecInput::wedding(config, 1.0).layer),
            coefficient: self.coefficient,
            alignment: self.alignment,
            dim_cutoff: self.dim_cutoff,
        }
    }
}

#[derive(Debug, Args)]
pub struct VectorArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    /// Use an exported vector file instead of building one.
    #[arg(long)]
    pub vector: Option<PathBuf>,
}

impl VectorArgs {
    fn to_ref(&self, config: &ModelConfig) -> VectorRef {
        match &self.vector {
            Some(path) => VectorRef::File(VectorFile { path: path.clone() }),
            None => VectorRef::Spec(self.spec.input(config)),
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Unsteered completions.
    Generate {
        #[arg(long)]
        prompt: String,
        #[arg(long, default_value_t = 1)]
        n: usize,
        #[command(flatten)]
        gen: GenArgs,
    },
    /// Baseline and steered completions side by side.
    Steer {
        #[arg(long)]
        prompt: String,
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, default_value_t = 1)]
        n: usize,
        /// Comma-separated words to score; defaults to the wedding list.
        #[arg(long, value_delimiter = ',')]
        keywords: Option<Vec<String>>,
        #[command(flatten)]
        gen: GenArgs,
    },
    /// Keyword scores of steered completions at each layer.
    SweepLayers {
        #[arg(long)]
        prompt: String,
        #[arg(long = "plus", default_value = service::DEFAULT_PLUS, allow_hyphen_values = true)]
        p_plus: String,
        #[arg(long = "minus", default_value = service::DEFAULT_MINUS, allow_hyphen_values = true)]
        p_minus: String,
        #[arg(long = "coef", default_value_t = 1.0, allow_hyphen_values = true)]
        coefficient: f32,
        /// Comma-separated; defaults to every layer.
        #[arg(long, value_delimiter = ',')]
        layers: Option<Vec<usize>>,
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long, value_delimiter = ',')]
        keywords: Option<Vec<String>>,
        #[command(flatten)]
        gen: GenArgs,
    },
    /// Keyword scores when only the first fraction of dimensions is kept.
    SweepPartial {
        #[arg(long)]
        prompt: String,
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,0.75,1")]
        fractions: Vec<f64>,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, value_delimiter = ',')]
        keywords: Option<Vec<String>>,
        #[command(flatten)]
        gen: GenArgs,
    },
    /// Perplexity ratio of the steered model per topic-frequency bin.
    EvalPerplexity {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        vector: VectorArgs,
    },
    /// Perplexity ratio of prompting with a prefix instead of steering.
    EvalPrompting {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long, default_value = service::DEFAULT_PLUS, allow_hyphen_values = true)]
        prefix: String,
    },
    /// Per-token logprob shifts under steering.
    EvalShift {
        #[arg(long)]
        corpus: String,
        #[arg(long, default_value_t = 20)]
        min_instances: usize,
        #[command(flatten)]
        vector: VectorArgs,
    },
    /// P@K on a single-token knowledge set, with and without steering.
    EvalPk {
        #[arg(long)]
        knowledge: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1,5,10,50")]
        ks: Vec<usize>,
        #[command(flatten)]
        vector: VectorArgs,
    },
    /// KL shift of a vector against a norm-matched random vector.
    EvalKl {
        /// Text file with one prompt per line.
        #[arg(long, required_unless_present = "prompt")]
        prompts: Option<PathBuf>,
        /// Repeatable alternative to --prompts.
        #[arg(long)]
        prompt: Vec<String>,
        #[arg(long, default_value_t = 0)]
        random_seed: u64,
        #[command(flatten)]
        vector: VectorArgs,
    },
    /// Time plain versus steered forward passes.
    BenchPremium {
        #[arg(long, default_value_t = 100)]
        reps: usize,
        #[arg(long, default_value_t = 2)]
        warmup: usize,
        /// Number of seeds (0..N).
        #[arg(long, default_value_t = 10)]
        seeds: u64,
        #[arg(long, default_value_t = 32)]
        batch: usize,
        #[arg(long, default_value_t = 64)]
        seq_len: usize,
        /// Also time a sleep stub: `base_ms,overhead_ms`.
        #[arg(long, value_delimiter = ',')]
        stub_ms: Option<Vec<u64>>,
        /// Skip the configured model (stub only).
        #[arg(long)]
        no_model: bool,
    },
    /// Build a steering vector and write it as AAWF.
    ExportVector {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the HTTP API.
    Serve,
    /// Verify checksums and shapes of an AAWF file.
    ConvertCheck { path: PathBuf },
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    /// File, directory or glob of .txt / .jsonl documents.
    #[arg(long)]
    pub corpus: String,
    #[arg(long, default_value_t = actadd_core::corpus::DEFAULT_BIN_WIDTH)]
    pub bin_width: f64,
    #[arg(long, default_value_t = actadd_core::corpus::DEFAULT_MIN_COUNT)]
    pub min_count: usize,
    /// Use two bins split at this frequency instead of fixed-width bins.
    #[arg(long)]
    pub related_threshold: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub keywords: Option<Vec<String>>,
}

impl CorpusArgs {
    fn request(&self, vector: Option<VectorRef>, prefix: Option<String>) -> PerplexityRequest {
        PerplexityRequest {
            corpus: self.corpus.clone(),
            bin_width: self.bin_width,
            min_count: self.min_count,
            keywords: self.keywords.clone(),
            related_threshold: self.related_threshold,
            vector,
            prefix,
        }
    }
}

/// Parse `argv` and run the subcommand; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli) {
        Ok(Some(outcome)) => {
            println!("{}", outcome.report.get());
            eprintln!("{}", outcome.summary);
            0
        }
        Ok(None) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<Option<Outcome>, ServiceError> {
    let config = cli.global.resolve()?;
    let command = match cli.command {
        Command::ConvertCheck { path } => return service::convert_check(&path).map(Some),
        Command::BenchPremium {
            reps,
            warmup,
            seeds,
            batch,
            seq_len,
            stub_ms,
            no_model,
        } => {
            let stub_ms = match stub_ms.as_deref() {
                None => None,
                Some(&[base, overhead]) => Some((base, overhead)),
                Some(_) => return Err(ServiceError::field("stub_ms", "expected `base_ms,overhead_ms`")),
            };
            let engine = if no_model { None } else { Some(config.load_engine()?) };
            let req = PremiumRequest {
                config: PremiumConfig {
                    reps,
                    warmup,
                    seeds: (0..seeds).collect(),
                    batch,
                    seq_len,
                },
                model: !no_model,
                stub_ms,
            };
            return service::premium(engine.as_ref(), &req).map(Some);
        }
        c => c,
    };
    let service = Service::new(config)?;
    let mc = service.engine.model.config.clone();
    let outcome = match command {
        Command::Generate { prompt, n, gen } => service.generate(&GenerateRequest {
            prompt,
            params: gen.params(),
            n_completions: n,
        })?,
        Command::Steer { prompt, spec, n, keywords, gen } => {
            let v = spec.input(&mc);
            service.steer(&SteerRequest {
                prompt,
                pair: v.pair,
                layer: v.layer,
                coefficient: v.coefficient,
                alignment: v.alignment,
                dim_cutoff: v.dim_cutoff,
                params: gen.params(),
                n_completions: n,
                keywords,
            })?
        }
        Command::SweepLayers {
            prompt,
            p_plus,
            p_minus,
            coefficient,
            layers,
            n,
            keywords,
            gen,
        } => service.sweep_layers(&SweepLayersRequest {
            prompt,
            pair: PairInput { p_plus, p_minus },
            coefficient,
            layers,
            n,
            params: gen.params(),
            keywords,
        })?,
        Command::SweepPartial {
            prompt,
            spec,
            fractions,
            n,
            keywords,
            gen,
        } => service.sweep_partial(&SweepPartialRequest {
            prompt,
            spec: spec.input(&mc),
            fractions,
            n,
            params: gen.params(),
            keywords,
        })?,
        Command::EvalPerplexity { corpus, vector } => {
            service.perplexity(&corpus.request(Some(vector.to_ref(&mc)), None))?
        }
        Command::EvalPrompting { corpus, prefix } => service.perplexity(&corpus.request(None, Some(prefix)))?,
        Command::EvalShift {
            corpus,
            min_instances,
            vector,
        } => service.token_shift(&ShiftRequest {
            corpus,
            vector: Some(vector.to_ref(&mc)),
            min_instances,
        })?,
        Command::EvalPk { knowledge, ks, vector } => service.p_at_k(&PkRequest {
            knowledge,
            vector: Some(vector.to_ref(&mc)),
            ks,
        })?,
        Command::EvalKl {
            prompts,
            prompt,
            random_seed,
            vector,
        } => {
            let mut all = prompt;
            if let Some(path) = prompts {
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| ServiceError::field("prompts", format!("cannot read {}: {e}", path.display())))?;
                all.extend(text.lines().filter(|l| !l.trim().is_empty()).map(str::to_string));
            }
            service.kl(&KlRequest {
                prompts: all,
                vector: Some(vector.to_ref(&mc)),
                random_seed,
            })?
        }
        Command::ExportVector { spec, out } => service.export_vector(&spec.input(&mc), &out)?,
        Command::Serve => {
            let rt = tokio::runtime::Runtime::new().map_err(|e| ServiceError::Internal(e.to_string()))?;
            rt.block_on(crate::http::serve(service))
                .map_err(|e| ServiceError::Internal(format!("server: {e}")))?;
            return Ok(None);
        }
        Command::ConvertCheck { .. } | Command::BenchPremium { .. } => unreachable!("handled above"),
    };
    Ok(Some(outcome))
}
