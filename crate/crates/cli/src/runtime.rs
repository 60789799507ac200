//! Shared assembly for the batch commands: backend construction, prompt
//! assets, templates, and the ordered parallel map over work items.

use std::path::Path;
use std::sync::Arc;

use anyhow::Context;
use verbatim_core::backend::mock_corpus_from_texts;
use verbatim_core::{
    ChatTemplate, LmBackend, MockNgramBackend, PromptAssets, RemoteBackend, TemplateKind,
};

use crate::config::{BackendChoice, Config};

pub fn template(config: &Config) -> anyhow::Result<ChatTemplate> {
    let kind: TemplateKind = config
        .prompt
        .template
        .parse()
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    Ok(ChatTemplate::new(kind))
}

pub fn prompt_assets(config: &Config) -> anyhow::Result<PromptAssets> {
    match &config.prompt.assets_dir {
        None => Ok(PromptAssets::default()),
        Some(dir) => PromptAssets::load_dir(dir).map_err(|e| anyhow::anyhow!("{e}")),
    }
}

/// Build the configured backend. The mock backend trains on `corpus_texts`
/// (rendered prompts plus post bodies) unless a corpus file is configured;
/// the remote backend handshakes eagerly so unreachable servers fail before
/// any item is processed.
pub fn build_backend(
    config: &Config,
    corpus_texts: &[String],
) -> anyhow::Result<Arc<dyn LmBackend>> {
    match config.backend.kind {
        BackendChoice::Mock => {
            let corpus = match &config.backend.mock_corpus {
                Some(path) => std::fs::read_to_string(path)
                    .with_context(|| format!("cannot read mock corpus {}", path.display()))?,
                None => mock_corpus_from_texts(corpus_texts.iter().map(String::as_str)),
            };
            let backend = MockNgramBackend::from_corpus(
                &corpus,
                config.backend.mock_order,
                config.backend.mock_smoothing,
            )?;
            Ok(Arc::new(backend))
        }
        BackendChoice::Remote => {
            let backend = RemoteBackend::connect(verbatim_core::backend::RemoteConfig {
                endpoint: config.backend.endpoint.clone(),
                timeout_secs: config.backend.timeout_secs,
                retries: config.backend.retries,
            })
            .with_context(|| {
                format!(
                    "remote backend handshake with {} failed",
                    config.backend.endpoint
                )
            })?;
            Ok(Arc::new(backend))
        }
    }
}

/// Effective worker count: explicit `jobs`, else all cores for the mock
/// backend and a single lane for a remote server.
pub fn effective_jobs(config: &Config) -> usize {
    if config.run.jobs != 0 {
        return config.run.jobs;
    }
    match config.backend.kind {
        BackendChoice::Mock => std::thread::available_parallelism().map_or(1, |n| n.get()),
        BackendChoice::Remote => 1,
    }
}

/// Map a worker over indexed items, preserving input order in the output.
#[cfg(feature = "parallel")]
pub fn ordered_map<T, R, F>(items: Vec<T>, jobs: usize, worker: F) -> Vec<R>
where
    T: Send + Sync,
    R: Send,
    F: Fn(&T) -> R + Send + Sync,
{
    use rayon::prelude::*;
    if jobs <= 1 {
        return items.iter().map(&worker).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .expect("worker pool");
    pool.install(|| items.par_iter().map(&worker).collect())
}

#[cfg(not(feature = "parallel"))]
pub fn ordered_map<T, R, F>(items: Vec<T>, _jobs: usize, worker: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(&worker).collect()
}

pub fn now_iso() -> String {
    chrono::Utc::now().to_rfc3339()
}

pub fn ensure_out_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| anyhow::anyhow!("cannot create out dir {}: {e}", dir.display()))
}

pub fn dump_prompt(dir: &Path, id: &str, rendered: &str) -> anyhow::Result<()> {
    let prompts = dir.join("prompts");
    std::fs::create_dir_all(&prompts)?;
    let safe: String = id
        .chars()
        .map(|c| if c.is_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect();
    std::fs::write(prompts.join(format!("{safe}.txt")), rendered)?;
    Ok(())
}
