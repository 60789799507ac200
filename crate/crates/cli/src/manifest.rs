//! Run manifests: everything needed to re-run a batch bit-identically with
//! the mock backend, plus wall-clock accounting kept in its own section so
//! reproducibility checks can ignore it.

use serde::{Deserialize, Serialize};
use verbatim_core::BackendDescriptor;

use crate::config::Config;

/// Fixed algorithm choices that affect outputs; recorded so runs stay
/// comparable across toolkit versions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlgorithmNotes {
    pub rng_algorithm: String,
    pub seed_derivation: String,
    pub word_tokenizer: String,
    pub metric_token_counter: String,
    pub sentence_splitter: String,
    pub repeat_penalty_scope: String,
    pub priming_whitespace: String,
}

impl Default for AlgorithmNotes {
    fn default() -> Self {
        AlgorithmNotes {
            rng_algorithm: verbatim_core::sampler::RNG_ALGORITHM.into(),
            seed_derivation: "fnv1a64(run_seed_le_bytes || item_id)".into(),
            word_tokenizer: "maximal runs of non-whitespace (Unicode)".into(),
            metric_token_counter: "whitespace tokens of concatenated highlights".into(),
            sentence_splitter: verbatim_core::metrics::SENTENCE_SPLITTER_VERSION.into(),
            repeat_penalty_scope: "prompt tail plus generated tokens within penalty_window".into(),
            priming_whitespace: "no trailing whitespace after the priming sentence".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemTiming {
    pub id: String,
    pub ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub started: String,
    pub finished: String,
    pub total_ms: f64,
    pub per_item: Vec<ItemTiming>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub toolkit_version: String,
    pub command: String,
    pub config: Config,
    pub algorithms: AlgorithmNotes,
    pub backend: BackendDescriptor,
    pub items: usize,
    pub failures: usize,
    /// Wall-clock data; excluded from reproducibility comparisons.
    pub timing: Timing,
}

impl RunManifest {
    pub fn new(
        command: &str,
        config: Config,
        backend: BackendDescriptor,
        items: usize,
        failures: usize,
        timing: Timing,
    ) -> Self {
        RunManifest {
            toolkit_version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config,
            algorithms: AlgorithmNotes::default(),
            backend,
            items,
            failures,
            timing,
        }
    }

    pub fn write(&self, path: &std::path::Path) -> anyhow::Result<()> {
        let mut json = serde_json::to_string_pretty(self)?;
        json.push('\n');
        std::fs::write(path, json)
            .map_err(|e| anyhow::anyhow!("cannot write {}: {e}", path.display()))?;
        Ok(())
    }
}

/// The manifest with its volatile wall-clock section removed, for
/// byte-comparing reproducibility.
pub fn reproducible_view(manifest_json: &str) -> anyhow::Result<serde_json::Value> {
    let mut value: serde_json::Value = serde_json::from_str(manifest_json)?;
    if let Some(object) = value.as_object_mut() {
        object.remove("timing");
    }
    Ok(value)
}
