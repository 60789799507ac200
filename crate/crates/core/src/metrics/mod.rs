//! Evaluation of generated highlights and summaries against gold
//! annotations, reported overall and split by risk level.
//!
//! Highlight metrics pair every gold highlight with its best-matching
//! generated one (recall) and vice versa (precision); weighted recall scales
//! recall down when the generated side is longer in total. Summary metrics
//! run an NLI scorer per generated sentence against the gold summary:
//! consistency averages `1 - p`, contradiction takes the per-user maximum.
//! Users are aggregated macro-first (per-user values, then means); a
//! per-highlight micro mode exists for sensitivity analysis.

mod scorers;
mod sentences;

pub use scorers::{
    ExactMatchScorer, LexicalF1Scorer, NliPair, NliScorer, RemoteNliScorer,
    RemoteSimilarityScorer, SimilarityScorer, TableNliScorer,
};
pub use sentences::{split_sentences, SENTENCE_SPLITTER_VERSION};

use std::collections::BTreeMap;

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::risk::RiskLevel;

/// Gold and generated evidence for one user. Lists may be empty; empty
/// generated sides score zero, an empty gold side skips the record with a
/// warning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceRecord {
    pub user_id: String,
    pub risk_level: RiskLevel,
    #[serde(default)]
    pub gold_highlights: Vec<String>,
    #[serde(default)]
    pub generated_highlights: Vec<String>,
    #[serde(default)]
    pub gold_summary: String,
    #[serde(default)]
    pub generated_summary: String,
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("user `{user_id}` has no gold highlights")]
    EmptyGold { user_id: String },
    #[error("no records to aggregate")]
    NoRecords,
}

/// `L_gold` / `L_candidate`: whitespace tokens across all highlights.
pub fn highlight_token_count(highlights: &[String]) -> usize {
    highlights
        .iter()
        .map(|h| h.split_whitespace().count())
        .sum()
}

fn best_score(needle: &str, haystack: &[String], scorer: &dyn SimilarityScorer) -> f64 {
    haystack
        .iter()
        .map(|candidate| scorer.score(needle, candidate))
        .fold(0.0, f64::max)
}

/// Mean over gold highlights of the best similarity among generated ones;
/// 0 when nothing was generated. Empty gold is an error (the record is
/// skipped with a warning at aggregation).
pub fn highlight_recall(
    record: &EvidenceRecord,
    scorer: &dyn SimilarityScorer,
) -> Result<f64, MetricsError> {
    if record.gold_highlights.is_empty() {
        return Err(MetricsError::EmptyGold {
            user_id: record.user_id.clone(),
        });
    }
    if record.generated_highlights.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = record
        .gold_highlights
        .iter()
        .map(|gold| best_score(gold, &record.generated_highlights, scorer))
        .sum();
    Ok(total / record.gold_highlights.len() as f64)
}

/// Mean over generated highlights of the best similarity among gold ones;
/// 0 when nothing was generated.
pub fn highlight_precision(record: &EvidenceRecord, scorer: &dyn SimilarityScorer) -> f64 {
    if record.generated_highlights.is_empty() {
        return 0.0;
    }
    let total: f64 = record
        .generated_highlights
        .iter()
        .map(|generated| best_score(generated, &record.gold_highlights, scorer))
        .sum();
    total / record.generated_highlights.len() as f64
}

/// Scale recall by `L_gold / L_candidate` when the generated side is longer.
pub fn weighted_recall(recall: f64, l_gold: usize, l_candidate: usize) -> f64 {
    if l_candidate > l_gold {
        recall * l_gold as f64 / l_candidate as f64
    } else {
        recall
    }
}

/// `2PR / (P + R)`, zero when both are zero. Uses the unweighted recall.
pub fn harmonic_mean(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// How the NLI premise is chosen for each generated sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PremiseMode {
    /// The whole gold summary is the premise.
    #[default]
    WholeSummary,
    /// Pair against each gold sentence, take the maximum probability.
    PerSentenceMax,
}

/// How users combine into aggregate rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Averaging {
    /// Per-user metrics first, then the mean across users.
    #[default]
    Macro,
    /// Pool every (user, highlight) pair across users; summary metrics stay
    /// macro.
    Micro,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsConfig {
    pub averaging: Averaging,
    pub premise_mode: PremiseMode,
}

fn sentence_probs(record: &EvidenceRecord, nli: &dyn NliScorer, mode: PremiseMode) -> Vec<f64> {
    let sentences = split_sentences(&record.generated_summary);
    let gold_sentences = match mode {
        PremiseMode::WholeSummary => Vec::new(),
        PremiseMode::PerSentenceMax => split_sentences(&record.gold_summary),
    };
    sentences
        .iter()
        .map(|sentence| match mode {
            PremiseMode::WholeSummary => nli
                .contradiction_prob(&record.gold_summary, sentence)
                .clamp(0.0, 1.0),
            PremiseMode::PerSentenceMax => gold_sentences
                .iter()
                .map(|gold| nli.contradiction_prob(gold, sentence).clamp(0.0, 1.0))
                .fold(0.0, f64::max),
        })
        .collect()
}

/// Mean of `1 - p` over generated sentences; 0 for an empty generated
/// summary (warned at aggregation).
pub fn summary_consistency(record: &EvidenceRecord, nli: &dyn NliScorer) -> f64 {
    summary_consistency_with(record, nli, PremiseMode::WholeSummary)
}

pub fn summary_consistency_with(
    record: &EvidenceRecord,
    nli: &dyn NliScorer,
    mode: PremiseMode,
) -> f64 {
    let probs = sentence_probs(record, nli, mode);
    if probs.is_empty() {
        return 0.0;
    }
    probs.iter().map(|p| 1.0 - p).sum::<f64>() / probs.len() as f64
}

/// Maximum contradiction probability over generated sentences; 0 for an
/// empty generated summary (warned at aggregation). Lower is better.
pub fn summary_contradiction(record: &EvidenceRecord, nli: &dyn NliScorer) -> f64 {
    summary_contradiction_with(record, nli, PremiseMode::WholeSummary)
}

pub fn summary_contradiction_with(
    record: &EvidenceRecord,
    nli: &dyn NliScorer,
    mode: PremiseMode,
) -> f64 {
    sentence_probs(record, nli, mode)
        .into_iter()
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HighlightMetrics {
    pub recall: f64,
    pub precision: f64,
    pub weighted_recall: f64,
    pub harmonic_mean: f64,
    pub l_gold: usize,
    pub l_candidate: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryMetrics {
    pub consistency: f64,
    pub contradiction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserMetrics {
    pub user_id: String,
    pub risk_level: RiskLevel,
    /// Absent when the record was skipped for having no gold highlights.
    pub highlights: Option<HighlightMetrics>,
    /// Absent when the record has no gold summary.
    pub summary: Option<SummaryMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HighlightAggregate {
    pub users: usize,
    pub recall: f64,
    pub precision: f64,
    pub weighted_recall: f64,
    pub harmonic_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryAggregate {
    pub users: usize,
    pub consistency: f64,
    pub contradiction: f64,
}

/// One row of the report: aggregates over some user subset. Either section
/// is absent when no user in the subset contributed to it.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AggregateRow {
    pub highlights: Option<HighlightAggregate>,
    pub summaries: Option<SummaryAggregate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub config: MetricsConfig,
    pub similarity_scorer: String,
    pub nli_scorer: String,
    pub per_user: Vec<UserMetrics>,
    pub overall: AggregateRow,
    /// Only risk levels that actually have users appear here.
    pub by_risk: BTreeMap<RiskLevel, AggregateRow>,
    pub warnings: Vec<String>,
}

struct UserComputation {
    metrics: UserMetrics,
    warnings: Vec<String>,
    /// Per-gold-highlight best scores, for micro averaging.
    gold_best: Vec<f64>,
    /// Per-generated-highlight best scores, for micro averaging.
    generated_best: Vec<f64>,
}

fn compute_user(
    record: &EvidenceRecord,
    scorer: &dyn SimilarityScorer,
    nli: &dyn NliScorer,
    config: &MetricsConfig,
) -> UserComputation {
    let mut warnings = Vec::new();

    let mut gold_best = Vec::new();
    let mut generated_best = Vec::new();
    let highlights = match highlight_recall(record, scorer) {
        Err(MetricsError::EmptyGold { user_id }) => {
            warnings.push(format!(
                "user `{user_id}`: no gold highlights; highlight metrics skipped"
            ));
            None
        }
        Err(_) => unreachable!("highlight_recall only fails on empty gold"),
        Ok(recall) => {
            if record.generated_highlights.is_empty() {
                warnings.push(format!(
                    "user `{}`: no generated highlights; scored 0",
                    record.user_id
                ));
            }
            gold_best = record
                .gold_highlights
                .iter()
                .map(|g| best_score(g, &record.generated_highlights, scorer))
                .collect();
            generated_best = record
                .generated_highlights
                .iter()
                .map(|g| best_score(g, &record.gold_highlights, scorer))
                .collect();
            let precision = highlight_precision(record, scorer);
            let l_gold = highlight_token_count(&record.gold_highlights);
            let l_candidate = highlight_token_count(&record.generated_highlights);
            Some(HighlightMetrics {
                recall,
                precision,
                weighted_recall: weighted_recall(recall, l_gold, l_candidate),
                harmonic_mean: harmonic_mean(precision, recall),
                l_gold,
                l_candidate,
            })
        }
    };

    let summary = if record.gold_summary.trim().is_empty() {
        if !record.generated_summary.trim().is_empty() {
            warnings.push(format!(
                "user `{}`: no gold summary; summary metrics skipped",
                record.user_id
            ));
        }
        None
    } else {
        if record.generated_summary.trim().is_empty() {
            warnings.push(format!(
                "user `{}`: empty generated summary; consistency and contradiction scored 0",
                record.user_id
            ));
        }
        Some(SummaryMetrics {
            consistency: summary_consistency_with(record, nli, config.premise_mode),
            contradiction: summary_contradiction_with(record, nli, config.premise_mode),
        })
    };

    UserComputation {
        metrics: UserMetrics {
            user_id: record.user_id.clone(),
            risk_level: record.risk_level,
            highlights,
            summary,
        },
        warnings,
        gold_best,
        generated_best,
    }
}

fn mean(values: impl Iterator<Item = f64>, count: usize) -> f64 {
    if count == 0 {
        return 0.0;
    }
    values.sum::<f64>() / count as f64
}

fn aggregate_subset(computations: &[&UserComputation], averaging: Averaging) -> AggregateRow {
    let with_highlights: Vec<&UserComputation> = computations
        .iter()
        .filter(|c| c.metrics.highlights.is_some())
        .copied()
        .collect();
    let highlights = if with_highlights.is_empty() {
        None
    } else {
        match averaging {
            Averaging::Macro => {
                let n = with_highlights.len();
                let get = |f: fn(&HighlightMetrics) -> f64| {
                    mean(
                        with_highlights
                            .iter()
                            .map(|c| f(c.metrics.highlights.as_ref().unwrap())),
                        n,
                    )
                };
                let recall = get(|h| h.recall);
                let precision = get(|h| h.precision);
                Some(HighlightAggregate {
                    users: n,
                    recall,
                    precision,
                    weighted_recall: get(|h| h.weighted_recall),
                    harmonic_mean: harmonic_mean(precision, recall),
                })
            }
            Averaging::Micro => {
                let gold_pairs: Vec<f64> = with_highlights
                    .iter()
                    .flat_map(|c| c.gold_best.iter().copied())
                    .collect();
                let generated_pairs: Vec<f64> = with_highlights
                    .iter()
                    .flat_map(|c| c.generated_best.iter().copied())
                    .collect();
                let recall = mean(gold_pairs.iter().copied(), gold_pairs.len());
                let precision = mean(generated_pairs.iter().copied(), generated_pairs.len());
                let l_gold: usize = with_highlights
                    .iter()
                    .map(|c| c.metrics.highlights.as_ref().unwrap().l_gold)
                    .sum();
                let l_candidate: usize = with_highlights
                    .iter()
                    .map(|c| c.metrics.highlights.as_ref().unwrap().l_candidate)
                    .sum();
                Some(HighlightAggregate {
                    users: with_highlights.len(),
                    recall,
                    precision,
                    weighted_recall: weighted_recall(recall, l_gold, l_candidate),
                    harmonic_mean: harmonic_mean(precision, recall),
                })
            }
        }
    };

    let with_summaries: Vec<&SummaryMetrics> = computations
        .iter()
        .filter_map(|c| c.metrics.summary.as_ref())
        .collect();
    let summaries = if with_summaries.is_empty() {
        None
    } else {
        let n = with_summaries.len();
        Some(SummaryAggregate {
            users: n,
            consistency: mean(with_summaries.iter().map(|s| s.consistency), n),
            contradiction: mean(with_summaries.iter().map(|s| s.contradiction), n),
        })
    };

    AggregateRow {
        highlights,
        summaries,
    }
}

/// Per-user metrics plus overall and per-risk-level aggregates.
pub fn aggregate_report(
    records: &[EvidenceRecord],
    scorer: &dyn SimilarityScorer,
    nli: &dyn NliScorer,
    config: &MetricsConfig,
) -> Result<MetricsReport, MetricsError> {
    if records.is_empty() {
        return Err(MetricsError::NoRecords);
    }

    #[cfg(feature = "parallel")]
    let computations: Vec<UserComputation> = records
        .par_iter()
        .map(|record| compute_user(record, scorer, nli, config))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let computations: Vec<UserComputation> = records
        .iter()
        .map(|record| compute_user(record, scorer, nli, config))
        .collect();

    let all_refs: Vec<&UserComputation> = computations.iter().collect();
    let overall = aggregate_subset(&all_refs, config.averaging);

    let mut by_risk = BTreeMap::new();
    for level in RiskLevel::ALL {
        let subset: Vec<&UserComputation> = computations
            .iter()
            .filter(|c| c.metrics.risk_level == level)
            .collect();
        if subset.is_empty() {
            continue;
        }
        by_risk.insert(level, aggregate_subset(&subset, config.averaging));
    }

    let mut warnings = Vec::new();
    let mut per_user = Vec::new();
    for computation in computations {
        warnings.extend(computation.warnings);
        per_user.push(computation.metrics);
    }

    Ok(MetricsReport {
        config: config.clone(),
        similarity_scorer: scorer.name(),
        nli_scorer: nli.name(),
        per_user,
        overall,
        by_risk,
        warnings,
    })
}

impl MetricsReport {
    /// Aligned plain-text tables: one for highlights, one for summaries,
    /// each with an overall row and one row per present risk level.
    pub fn to_text_table(&self) -> String {
        let mut out = String::new();
        let rows: Vec<(String, &AggregateRow)> = std::iter::once(("overall".to_string(), &self.overall))
            .chain(self.by_risk.iter().map(|(l, row)| (l.to_string(), row)))
            .collect();

        out.push_str("Highlights\n");
        out.push_str(&format!(
            "{:<10} {:>6} {:>8} {:>10} {:>16} {:>14}\n",
            "risk", "users", "recall", "precision", "weighted-recall", "harmonic-mean"
        ));
        for (name, row) in &rows {
            match &row.highlights {
                Some(h) => out.push_str(&format!(
                    "{:<10} {:>6} {:>8.3} {:>10.3} {:>16.3} {:>14.3}\n",
                    name, h.users, h.recall, h.precision, h.weighted_recall, h.harmonic_mean
                )),
                None => out.push_str(&format!(
                    "{:<10} {:>6} {:>8} {:>10} {:>16} {:>14}\n",
                    name, 0, "n/a", "n/a", "n/a", "n/a"
                )),
            }
        }

        out.push_str("\nSummaries\n");
        out.push_str(&format!(
            "{:<10} {:>6} {:>12} {:>14}\n",
            "risk", "users", "consistency", "contradiction"
        ));
        for (name, row) in &rows {
            match &row.summaries {
                Some(s) => out.push_str(&format!(
                    "{:<10} {:>6} {:>12.3} {:>14.3}\n",
                    name, s.users, s.consistency, s.contradiction
                )),
                None => out.push_str(&format!(
                    "{:<10} {:>6} {:>12} {:>14}\n",
                    name, 0, "n/a", "n/a"
                )),
            }
        }

        if !self.warnings.is_empty() {
            out.push_str("\nWarnings\n");
            for warning in &self.warnings {
                out.push_str(&format!("  - {warning}\n"));
            }
        }
        out
    }
}
