use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use verbatim_core::{
    build_highlight_grammar, decode_constrained, recognizer::DEFAULT_STACK_LIMIT, tokenize_words,
    Recognizer, SamplerConfig,
};

use crate::config::{CommonRunArgs, Config};
use crate::jsonl::{read_posts, write_jsonl, HighlightRow, PostRecord};
use crate::listparse::parse_highlight_list;
use crate::manifest::{ItemTiming, RunManifest, Timing};
use crate::runtime;

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Input posts (JSONL: user_id, post_id, risk_level, body).
    #[arg(long)]
    pub posts: PathBuf,
    #[command(flatten)]
    pub common: CommonRunArgs,
}

pub fn run(args: ExtractArgs) -> anyhow::Result<i32> {
    let started = runtime::now_iso();
    let t_run = Instant::now();
    let config = Config::resolve(&args.common)?;
    let assets = runtime::prompt_assets(&config)?;
    let template = runtime::template(&config)?;
    let posts = read_posts(&args.posts)?;
    runtime::ensure_out_dir(&config.run.out_dir)?;

    // Prompts are rendered up front: the mock corpus must cover them, and
    // prompt failures are per-item results, not run failures.
    let rendered: Vec<Result<String, String>> = posts
        .iter()
        .map(|post| {
            verbatim_core::prompting::build_highlight_prompt(&assets, post.risk_level, &post.body)
                .map(|prompt| template.render(&prompt))
                .map_err(|e| e.to_string())
        })
        .collect();

    let mut corpus_texts: Vec<String> = rendered.iter().filter_map(|r| r.clone().ok()).collect();
    corpus_texts.extend(posts.iter().map(|p| p.body.clone()));
    let backend = runtime::build_backend(&config, &corpus_texts)?;

    if config.run.dump_prompt {
        for (post, prompt) in posts.iter().zip(&rendered) {
            if let Ok(prompt) = prompt {
                runtime::dump_prompt(&config.run.out_dir, &post.post_id, prompt)?;
            }
        }
    }

    let jobs = runtime::effective_jobs(&config);
    let sampler = config.sampler.clone();
    let items: Vec<(PostRecord, Result<String, String>)> =
        posts.into_iter().zip(rendered).collect();
    let backend_ref = backend.as_ref();

    let results: Vec<(HighlightRow, f64)> = runtime::ordered_map(items, jobs, |(post, prompt)| {
        let t_item = Instant::now();
        let row = extract_one(post, prompt, backend_ref, &sampler);
        (row, t_item.elapsed().as_secs_f64() * 1e3)
    });

    let rows: Vec<HighlightRow> = results.iter().map(|(row, _)| row.clone()).collect();
    let failures = rows.iter().filter(|r| r.error.is_some()).count();
    write_jsonl(&config.run.out_dir.join("highlights.jsonl"), &rows)?;

    let per_item = results
        .iter()
        .map(|(row, ms)| ItemTiming {
            id: row.post_id.clone(),
            ms: *ms,
        })
        .collect();
    let manifest = RunManifest::new(
        "extract",
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

    for row in rows.iter().filter(|r| r.error.is_some()) {
        eprintln!(
            "warning: post {} failed: {}",
            row.post_id,
            row.error.as_deref().unwrap_or("")
        );
    }
    println!(
        "extracted highlights for {} posts ({} failures) -> {}",
        rows.len(),
        failures,
        config.run.out_dir.display()
    );
    Ok(if failures > 0 { 1 } else { 0 })
}

fn extract_one(
    post: &PostRecord,
    prompt: &Result<String, String>,
    backend: &dyn verbatim_core::LmBackend,
    sampler: &SamplerConfig,
) -> HighlightRow {
    let error_row = |message: String| HighlightRow {
        user_id: post.user_id.clone(),
        post_id: post.post_id.clone(),
        highlights: Vec::new(),
        truncated: false,
        error: Some(message),
    };
    let rendered = match prompt {
        Ok(rendered) => rendered,
        Err(message) => return error_row(message.clone()),
    };
    let result = (|| -> anyhow::Result<HighlightRow> {
        let source = tokenize_words(&post.body)?;
        let grammar = build_highlight_grammar(&source)?;
        // Highlight grammars hold O(words) live stacks; scale the guard.
        let limit = DEFAULT_STACK_LIMIT.max(source.words.len() * 2 + 16);
        let recognizer = Recognizer::compile_with_limit(&grammar, limit)?;
        let prompt_tokens = backend.tokenize(rendered)?;
        let mut cfg = sampler.clone();
        cfg.seed = crate::derive_item_seed(sampler.seed, &post.post_id);
        let output = decode_constrained(backend, &prompt_tokens, Some(&recognizer), &cfg)?;
        let parsed = parse_highlight_list(&output.text)?;
        Ok(HighlightRow {
            user_id: post.user_id.clone(),
            post_id: post.post_id.clone(),
            highlights: parsed.items,
            truncated: parsed.truncated,
            error: None,
        })
    })();
    result.unwrap_or_else(|e| error_row(format!("{e:#}")))
}
