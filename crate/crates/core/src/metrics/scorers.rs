//! Pluggable similarity and NLI scorer contracts with deterministic defaults
//! and remote adapters.
//!
//! The embedding-based similarity and NLI models behind the published scores
//! are models, not formulas, so they stay behind these contracts: CI runs on
//! the deterministic lexical/table scorers, and anyone with the models serves
//! them over the same wire style as the logits backend
//! (`docs/remote-protocol.md`).

use std::collections::HashMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

/// Semantic similarity in [0, 1]; not required to be symmetric.
pub trait SimilarityScorer: Send + Sync {
    fn score(&self, a: &str, b: &str) -> f64;

    /// Identifier recorded in run manifests.
    fn name(&self) -> String;
}

/// Probability that `hypothesis` contradicts `premise`, in [0, 1].
pub trait NliScorer: Send + Sync {
    fn contradiction_prob(&self, premise: &str, hypothesis: &str) -> f64;

    fn name(&self) -> String;
}

fn lexical_tokens(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_lowercase).collect()
}

/// Token-level F1 overlap on lowercased whitespace tokens. The deterministic
/// stand-in for an embedding-based similarity.
#[derive(Debug, Default, Clone, Copy)]
pub struct LexicalF1Scorer;

impl SimilarityScorer for LexicalF1Scorer {
    fn score(&self, a: &str, b: &str) -> f64 {
        let ta = lexical_tokens(a);
        let tb = lexical_tokens(b);
        if ta.is_empty() && tb.is_empty() {
            return 1.0;
        }
        if ta.is_empty() || tb.is_empty() {
            return 0.0;
        }
        let mut counts: HashMap<&str, i64> = HashMap::new();
        for token in &ta {
            *counts.entry(token).or_default() += 1;
        }
        let mut common = 0i64;
        for token in &tb {
            if let Some(count) = counts.get_mut(token.as_str()) {
                if *count > 0 {
                    *count -= 1;
                    common += 1;
                }
            }
        }
        if common == 0 {
            return 0.0;
        }
        let precision = common as f64 / tb.len() as f64;
        let recall = common as f64 / ta.len() as f64;
        2.0 * precision * recall / (precision + recall)
    }

    fn name(&self) -> String {
        "lexical-f1".into()
    }
}

/// Indicator scorer: 1 on trimmed equality, else 0.
#[derive(Debug, Default, Clone, Copy)]
pub struct ExactMatchScorer;

impl SimilarityScorer for ExactMatchScorer {
    fn score(&self, a: &str, b: &str) -> f64 {
        if a.trim() == b.trim() {
            1.0
        } else {
            0.0
        }
    }

    fn name(&self) -> String {
        "exact-match".into()
    }
}

/// Rule-based NLI oracle over fixed (premise, hypothesis) pairs; everything
/// else gets the default probability.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableNliScorer {
    #[serde(default)]
    pub default: f64,
    #[serde(default)]
    pub pairs: Vec<NliPair>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NliPair {
    pub premise: String,
    pub hypothesis: String,
    pub p: f64,
}

impl TableNliScorer {
    pub fn new(default: f64) -> Self {
        TableNliScorer {
            default,
            pairs: Vec::new(),
        }
    }

    pub fn with_pair(mut self, premise: &str, hypothesis: &str, p: f64) -> Self {
        self.pairs.push(NliPair {
            premise: premise.into(),
            hypothesis: hypothesis.into(),
            p,
        });
        self
    }
}

impl NliScorer for TableNliScorer {
    fn contradiction_prob(&self, premise: &str, hypothesis: &str) -> f64 {
        self.pairs
            .iter()
            .find(|pair| pair.premise == premise && pair.hypothesis == hypothesis)
            .map(|pair| pair.p)
            .unwrap_or(self.default)
            .clamp(0.0, 1.0)
    }

    fn name(&self) -> String {
        format!("nli-table(default={})", self.default)
    }
}

#[derive(Debug, Serialize)]
struct ScoreRequest<'a> {
    a: &'a str,
    b: &'a str,
}

#[derive(Debug, Deserialize)]
struct ScoreResponse {
    score: f64,
}

#[derive(Debug, Serialize)]
struct ContradictionRequest<'a> {
    premise: &'a str,
    hypothesis: &'a str,
}

#[derive(Debug, Deserialize)]
struct ContradictionResponse {
    p: f64,
}

/// HTTP adapter for an embedding-based similarity scorer
/// (`POST {endpoint}/score`).
pub struct RemoteSimilarityScorer {
    endpoint: String,
    client: reqwest::blocking::Client,
}

impl RemoteSimilarityScorer {
    pub fn new(endpoint: impl Into<String>, timeout_secs: u64) -> Result<Self, reqwest::Error> {
        Ok(RemoteSimilarityScorer {
            endpoint: endpoint.into().trim_end_matches('/').to_string(),
            client: reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(timeout_secs))
                .build()?,
        })
    }
}

impl SimilarityScorer for RemoteSimilarityScorer {
    fn score(&self, a: &str, b: &str) -> f64 {
        let url = format!("{}/score", self.endpoint);
        let response = self
            .client
            .post(&url)
            .json(&ScoreRequest { a, b })
            .send()
            .and_then(|r| r.error_for_status())
            .and_then(|r| r.json::<ScoreResponse>());
        match response {
            // Scores outside [0,1] violate the contract; clamp and continue.
            Ok(r) => r.score.clamp(0.0, 1.0),
            Err(e) => panic!("remote similarity scorer at {url} failed: {e}"),
        }
    }

    fn name(&self) -> String {
        format!("remote-similarity({})", self.endpoint)
    }
}

/// HTTP adapter for an NLI contradiction scorer
/// (`POST {endpoint}/contradiction`).
pub struct RemoteNliScorer {
    endpoint: String,
    client: reqwest::blocking::Client,
}

impl RemoteNliScorer {
    pub fn new(endpoint: impl Into<String>, timeout_secs: u64) -> Result<Self, reqwest::Error> {
        Ok(RemoteNliScorer {
            endpoint: endpoint.into().trim_end_matches('/').to_string(),
            client: reqwest::blocking::Client::builder()
                .timeout(Duration::from_secs(timeout_secs))
                .build()?,
        })
    }
}

impl NliScorer for RemoteNliScorer {
    fn contradiction_prob(&self, premise: &str, hypothesis: &str) -> f64 {
        let url = format!("{}/contradiction", self.endpoint);
        let response = self
            .client
            .post(&url)
            .json(&ContradictionRequest { premise, hypothesis })
            .send()
            .and_then(|r| r.error_for_status())
            .and_then(|r| r.json::<ContradictionResponse>());
        match response {
            Ok(r) => r.p.clamp(0.0, 1.0),
            Err(e) => panic!("remote NLI scorer at {url} failed: {e}"),
        }
    }

    fn name(&self) -> String {
        format!("remote-nli({})", self.endpoint)
    }
}
