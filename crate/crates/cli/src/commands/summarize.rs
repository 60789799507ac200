use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use verbatim_core::{decode_constrained, RiskLevel, SamplerConfig};

use crate::config::{CommonRunArgs, Config};
use crate::jsonl::{read_posts, write_jsonl, SummaryRow};
use crate::manifest::{ItemTiming, RunManifest, Timing};
use crate::runtime;

#[derive(Debug, Args)]
pub struct SummarizeArgs {
    /// Input posts (JSONL); grouped by user_id in input order.
    #[arg(long)]
    pub posts: PathBuf,
    #[command(flatten)]
    pub common: CommonRunArgs,
}

struct UserGroup {
    user_id: String,
    risk_level: RiskLevel,
    bodies: Vec<String>,
}

pub fn run(args: SummarizeArgs) -> anyhow::Result<i32> {
    let started = runtime::now_iso();
    let t_run = Instant::now();
    let config = Config::resolve(&args.common)?;
    let assets = runtime::prompt_assets(&config)?;
    let template = runtime::template(&config)?;
    let posts = read_posts(&args.posts)?;
    runtime::ensure_out_dir(&config.run.out_dir)?;

    let mut groups: Vec<UserGroup> = Vec::new();
    for post in posts {
        match groups.iter_mut().find(|g| g.user_id == post.user_id) {
            Some(group) => {
                if group.risk_level != post.risk_level {
                    eprintln!(
                        "warning: user {} has mixed risk levels; keeping {}",
                        post.user_id, group.risk_level
                    );
                }
                group.bodies.push(post.body);
            }
            None => groups.push(UserGroup {
                user_id: post.user_id,
                risk_level: post.risk_level,
                bodies: vec![post.body],
            }),
        }
    }

    struct Prepared {
        group: UserGroup,
        rendered: Result<(String, String), String>, // (prompt, priming)
    }
    let prepared: Vec<Prepared> = groups
        .into_iter()
        .map(|group| {
            let rendered = verbatim_core::prompting::build_summary_prompt(
                &assets,
                group.risk_level,
                &group.bodies,
            )
            .map(|prompt| {
                let priming = prompt.priming_prefix.clone().unwrap_or_default();
                (template.render(&prompt), priming)
            })
            .map_err(|e| e.to_string());
            Prepared { group, rendered }
        })
        .collect();

    let mut corpus_texts: Vec<String> = prepared
        .iter()
        .filter_map(|p| p.rendered.as_ref().ok().map(|(prompt, _)| prompt.clone()))
        .collect();
    corpus_texts.extend(prepared.iter().flat_map(|p| p.group.bodies.clone()));
    let backend = runtime::build_backend(&config, &corpus_texts)?;

    if config.run.dump_prompt {
        for item in &prepared {
            if let Ok((prompt, _)) = &item.rendered {
                runtime::dump_prompt(&config.run.out_dir, &item.group.user_id, prompt)?;
            }
        }
    }

    let jobs = runtime::effective_jobs(&config);
    let sampler = config.sampler.clone();
    let backend_ref = backend.as_ref();

    let results: Vec<(SummaryRow, f64)> = runtime::ordered_map(prepared, jobs, |item| {
        let t_item = Instant::now();
        let row = summarize_one(&item.group, &item.rendered, backend_ref, &sampler);
        (row, t_item.elapsed().as_secs_f64() * 1e3)
    });

    let rows: Vec<SummaryRow> = results.iter().map(|(row, _)| row.clone()).collect();
    let failures = rows.iter().filter(|r| r.error.is_some()).count();
    write_jsonl(&config.run.out_dir.join("summaries.jsonl"), &rows)?;

    let per_item = results
        .iter()
        .map(|(row, ms)| ItemTiming {
            id: row.user_id.clone(),
            ms: *ms,
        })
        .collect();
    let manifest = RunManifest::new(
        "summarize",
        config.clone(),
        backend.descriptor(),
        rows.len(),
        failures,
        Timing {
            started,
            finished: runtime::now_iso(),
            total_ms: t_run.elapsed().as_secs_f64() * 1e3,
            per_item,
        },
    );
    manifest.write(&config.run.out_dir.join("manifest.json"))?;

    println!(
        "summarized {} users ({} failures) -> {}",
        rows.len(),
        failures,
        config.run.out_dir.display()
    );
    Ok(if failures > 0 { 1 } else { 0 })
}

fn summarize_one(
    group: &UserGroup,
    rendered: &Result<(String, String), String>,
    backend: &dyn verbatim_core::LmBackend,
    sampler: &SamplerConfig,
) -> SummaryRow {
    let error_row = |message: String| SummaryRow {
        user_id: group.user_id.clone(),
        risk_level: group.risk_level,
        summary: String::new(),
        error: Some(message),
    };
    let (prompt, priming) = match rendered {
        Ok(pair) => pair,
        Err(message) => return error_row(message.clone()),
    };
    let result = (|| -> anyhow::Result<SummaryRow> {
        let prompt_tokens = backend.tokenize(prompt)?;
        let mut cfg = sampler.clone();
        cfg.seed = crate::derive_item_seed(sampler.seed, &group.user_id);
        // Unconstrained completion; the priming sentence is already in the
        // prompt and stays part of the summary.
        let output = decode_constrained(backend, &prompt_tokens, None, &cfg)?;
        let mut summary = priming.clone();
        summary.push_str(&String::from_utf8_lossy(&output.text));
        Ok(SummaryRow {
            user_id: group.user_id.clone(),
            risk_level: group.risk_level,
            summary,
            error: None,
        })
    })();
    result.unwrap_or_else(|e| error_row(format!("{e:#}")))
}
