use std::collections::HashMap;
use std::path::PathBuf;

use clap::Args;
use verbatim_core::metrics::{
    aggregate_report, Averaging, EvidenceRecord, ExactMatchScorer, LexicalF1Scorer, MetricsConfig,
    NliScorer, PremiseMode, RemoteNliScorer, RemoteSimilarityScorer, SimilarityScorer,
    TableNliScorer,
};

use crate::config::Config;
use crate::jsonl::{read_jsonl, GoldRecord, HighlightRow, SummaryRow};
use crate::runtime;

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Gold annotations (JSONL: user_id, risk_level, highlights, summary).
    #[arg(long)]
    pub gold: PathBuf,
    /// Generated highlights (extract output); omit to skip highlight metrics.
    #[arg(long)]
    pub highlights: Option<PathBuf>,
    /// Generated summaries (summarize output); omit to skip summary metrics.
    #[arg(long)]
    pub summaries: Option<PathBuf>,
    /// Similarity scorer: lexical, exact, or remote:<endpoint>.
    #[arg(long)]
    pub scorer: Option<String>,
    /// NLI scorer: zero, table:<path>, or remote:<endpoint>.
    #[arg(long)]
    pub nli: Option<String>,
    /// macro or micro.
    #[arg(long)]
    pub averaging: Option<String>,
    /// NLI premise: whole-summary or per-sentence-max.
    #[arg(long)]
    pub premise: Option<String>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// TOML config file ([evaluate] section).
    #[arg(long)]
    pub config: Option<PathBuf>,
}

fn build_similarity(spec: &str, timeout: u64) -> anyhow::Result<Box<dyn SimilarityScorer>> {
    match spec {
        "lexical" => Ok(Box::new(LexicalF1Scorer)),
        "exact" => Ok(Box::new(ExactMatchScorer)),
        other => match other.strip_prefix("remote:") {
            Some(endpoint) => Ok(Box::new(RemoteSimilarityScorer::new(endpoint, timeout)?)),
            None => anyhow::bail!(
                "unknown similarity scorer `{other}` (expected lexical, exact, or remote:<endpoint>)"
            ),
        },
    }
}

fn build_nli(spec: &str, timeout: u64) -> anyhow::Result<Box<dyn NliScorer>> {
    match spec {
        "zero" => Ok(Box::new(TableNliScorer::new(0.0))),
        other => {
            if let Some(path) = other.strip_prefix("table:") {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| anyhow::anyhow!("cannot read NLI table {path}: {e}"))?;
                let table: TableNliScorer = serde_json::from_str(&text)
                    .map_err(|e| anyhow::anyhow!("invalid NLI table {path}: {e}"))?;
                Ok(Box::new(table))
            } else if let Some(endpoint) = other.strip_prefix("remote:") {
                Ok(Box::new(RemoteNliScorer::new(endpoint, timeout)?))
            } else {
                anyhow::bail!(
                    "unknown NLI scorer `{other}` (expected zero, table:<path>, or remote:<endpoint>)"
                )
            }
        }
    }
}

pub fn run(args: EvaluateArgs) -> anyhow::Result<i32> {
    if args.highlights.is_none() && args.summaries.is_none() {
        anyhow::bail!("nothing to evaluate: pass --highlights and/or --summaries");
    }
    let mut config = Config::load(args.config.as_deref())?;
    if let Some(scorer) = &args.scorer {
        config.evaluate.scorer = scorer.clone();
    }
    if let Some(nli) = &args.nli {
        config.evaluate.nli = nli.clone();
    }
    if let Some(averaging) = &args.averaging {
        config.evaluate.averaging = averaging.clone();
    }
    if let Some(premise) = &args.premise {
        config.evaluate.premise = premise.clone();
    }
    if let Some(out_dir) = &args.out_dir {
        config.run.out_dir = out_dir.clone();
    }

    let metrics_config = MetricsConfig {
        averaging: match config.evaluate.averaging.as_str() {
            "macro" => Averaging::Macro,
            "micro" => Averaging::Micro,
            other => anyhow::bail!("unknown averaging `{other}` (expected macro or micro)"),
        },
        premise_mode: match config.evaluate.premise.as_str() {
            "whole-summary" => PremiseMode::WholeSummary,
            "per-sentence-max" => PremiseMode::PerSentenceMax,
            other => anyhow::bail!(
                "unknown premise mode `{other}` (expected whole-summary or per-sentence-max)"
            ),
        },
    };
    let scorer = build_similarity(&config.evaluate.scorer, config.backend.timeout_secs)?;
    let nli = build_nli(&config.evaluate.nli, config.backend.timeout_secs)?;

    let gold: Vec<GoldRecord> = read_jsonl(&args.gold)?;
    let mut cli_warnings: Vec<String> = Vec::new();

    // Merge generated highlights per user in input order.
    let mut generated_highlights: HashMap<String, Vec<String>> = HashMap::new();
    if let Some(path) = &args.highlights {
        let rows: Vec<HighlightRow> = read_jsonl(path)?;
        for row in rows {
            generated_highlights
                .entry(row.user_id)
                .or_default()
                .extend(row.highlights);
        }
    }
    let mut generated_summaries: HashMap<String, String> = HashMap::new();
    if let Some(path) = &args.summaries {
        let rows: Vec<SummaryRow> = read_jsonl(path)?;
        for row in rows {
            generated_summaries.insert(row.user_id, row.summary);
        }
    }

    let gold_ids: std::collections::HashSet<&str> =
        gold.iter().map(|g| g.user_id.as_str()).collect();
    for id in generated_highlights.keys() {
        if !gold_ids.contains(id.as_str()) {
            cli_warnings.push(format!("user `{id}` in generated highlights has no gold record"));
        }
    }
    for id in generated_summaries.keys() {
        if !gold_ids.contains(id.as_str()) {
            cli_warnings.push(format!("user `{id}` in generated summaries has no gold record"));
        }
    }

    let records: Vec<EvidenceRecord> = gold
        .iter()
        .map(|g| {
            let gen_h = generated_highlights.get(&g.user_id).cloned();
            let gen_s = generated_summaries.get(&g.user_id).cloned();
            if args.highlights.is_some() && gen_h.is_none() {
                cli_warnings.push(format!("user `{}` missing from generated highlights", g.user_id));
            }
            if args.summaries.is_some() && gen_s.is_none() {
                cli_warnings.push(format!("user `{}` missing from generated summaries", g.user_id));
            }
            EvidenceRecord {
                user_id: g.user_id.clone(),
                risk_level: g.risk_level,
                // Sections not under evaluation are blanked so they do not
                // show up as zero scores.
                gold_highlights: if args.highlights.is_some() {
                    g.highlights.clone()
                } else {
                    Vec::new()
                },
                generated_highlights: gen_h.unwrap_or_default(),
                gold_summary: if args.summaries.is_some() {
                    g.summary.clone()
                } else {
                    String::new()
                },
                generated_summary: gen_s.unwrap_or_default(),
            }
        })
        .collect();

    let mut report = aggregate_report(&records, scorer.as_ref(), nli.as_ref(), &metrics_config)?;
    report.warnings.splice(0..0, cli_warnings);

    runtime::ensure_out_dir(&config.run.out_dir)?;
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    std::fs::write(config.run.out_dir.join("report.json"), json)?;
    let table = report.to_text_table();
    std::fs::write(config.run.out_dir.join("report.txt"), &table)?;
    print!("{table}");
    Ok(0)
}
