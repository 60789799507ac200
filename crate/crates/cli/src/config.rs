//! Effective run configuration: defaults, then a TOML config file, then the
//! `VERBATIM_ENDPOINT` environment variable, then command-line flags.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};
use verbatim_core::SamplerConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum BackendChoice {
    Mock,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackendConfig {
    pub kind: BackendChoice,
    pub endpoint: String,
    pub timeout_secs: u64,
    pub retries: u32,
    pub mock_order: usize,
    pub mock_smoothing: f64,
    /// Optional corpus file; when absent the corpus is synthesized from the
    /// input posts and prompt assets.
    pub mock_corpus: Option<PathBuf>,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            kind: BackendChoice::Mock,
            endpoint: "http://127.0.0.1:8080".into(),
            timeout_secs: 30,
            retries: 2,
            mock_order: 3,
            mock_smoothing: 0.1,
            mock_corpus: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PromptConfig {
    pub template: String,
    pub assets_dir: Option<PathBuf>,
}

impl Default for PromptConfig {
    fn default() -> Self {
        PromptConfig {
            template: "chatml".into(),
            assets_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunSettings {
    pub out_dir: PathBuf,
    /// 0 = one worker per core for the mock backend, 1 for remote.
    pub jobs: usize,
    pub dump_prompt: bool,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            out_dir: PathBuf::from("out"),
            jobs: 0,
            dump_prompt: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluateSettings {
    /// `lexical`, `exact`, or `remote:<endpoint>`.
    pub scorer: String,
    /// `zero`, `table:<path>`, or `remote:<endpoint>`.
    pub nli: String,
    /// `macro` or `micro`.
    pub averaging: String,
    /// `whole-summary` or `per-sentence-max`.
    pub premise: String,
}

impl Default for EvaluateSettings {
    fn default() -> Self {
        EvaluateSettings {
            scorer: "lexical".into(),
            nli: "zero".into(),
            averaging: "macro".into(),
            premise: "whole-summary".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub sampler: SamplerConfig,
    pub backend: BackendConfig,
    pub prompt: PromptConfig,
    pub run: RunSettings,
    pub evaluate: EvaluateSettings,
}

/// Flags shared by `extract` and `summarize`. Every flag overrides the
/// corresponding config-file key.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonRunArgs {
    /// TOML config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub backend: Option<BackendChoice>,
    /// Remote backend base URL (also via VERBATIM_ENDPOINT).
    #[arg(long)]
    pub endpoint: Option<String>,
    /// chatml, openchat, or plain.
    #[arg(long)]
    pub template: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_tokens: Option<usize>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub top_p: Option<f64>,
    #[arg(long)]
    pub repeat_penalty: Option<f64>,
    #[arg(long)]
    pub penalty_window: Option<usize>,
    /// Write each rendered prompt under <out-dir>/prompts/ for audit.
    #[arg(long)]
    pub dump_prompt: bool,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Parallel workers (0 = auto: cores for mock, 1 for remote).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Directory of replacement prompt assets.
    #[arg(long)]
    pub prompt_assets: Option<PathBuf>,
    /// Mock backend: corpus file instead of the synthesized one.
    #[arg(long)]
    pub mock_corpus: Option<PathBuf>,
    /// Mock backend: n-gram order.
    #[arg(long)]
    pub mock_order: Option<usize>,
    /// Mock backend: add-k smoothing constant.
    #[arg(long)]
    pub mock_smoothing: Option<f64>,
}

impl Config {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let mut config = match path {
            None => Config::default(),
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| anyhow::anyhow!("cannot read config {}: {e}", path.display()))?;
                toml::from_str(&text)
                    .map_err(|e| anyhow::anyhow!("invalid config {}: {e}", path.display()))?
            }
        };
        if let Ok(endpoint) = std::env::var("VERBATIM_ENDPOINT") {
            if !endpoint.is_empty() {
                config.backend.endpoint = endpoint;
            }
        }
        Ok(config)
    }

    pub fn apply_flags(&mut self, args: &CommonRunArgs) {
        if let Some(kind) = args.backend {
            self.backend.kind = kind;
        }
        if let Some(endpoint) = &args.endpoint {
            self.backend.endpoint = endpoint.clone();
        }
        if let Some(template) = &args.template {
            self.prompt.template = template.clone();
        }
        if let Some(seed) = args.seed {
            self.sampler.seed = seed;
        }
        if let Some(max_tokens) = args.max_tokens {
            self.sampler.max_tokens = max_tokens;
        }
        if let Some(temperature) = args.temperature {
            self.sampler.temperature = temperature;
        }
        if let Some(top_p) = args.top_p {
            self.sampler.top_p = top_p;
        }
        if let Some(repeat_penalty) = args.repeat_penalty {
            self.sampler.repeat_penalty = repeat_penalty;
        }
        if let Some(penalty_window) = args.penalty_window {
            self.sampler.penalty_window = penalty_window;
        }
        if args.dump_prompt {
            self.run.dump_prompt = true;
        }
        if let Some(out_dir) = &args.out_dir {
            self.run.out_dir = out_dir.clone();
        }
        if let Some(jobs) = args.jobs {
            self.run.jobs = jobs;
        }
        if let Some(dir) = &args.prompt_assets {
            self.prompt.assets_dir = Some(dir.clone());
        }
        if let Some(corpus) = &args.mock_corpus {
            self.backend.mock_corpus = Some(corpus.clone());
        }
        if let Some(order) = args.mock_order {
            self.backend.mock_order = order;
        }
        if let Some(smoothing) = args.mock_smoothing {
            self.backend.mock_smoothing = smoothing;
        }
    }

    pub fn resolve(args: &CommonRunArgs) -> anyhow::Result<Self> {
        let mut config = Config::load(args.config.as_deref())?;
        config.apply_flags(args);
        Ok(config)
    }
}
