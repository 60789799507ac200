//! End-to-end tests of the `verbatim` binary surface.

use std::path::{Path, PathBuf};
use std::process::Command;

use verbatim_cli::jsonl::{HighlightRow, SummaryRow};
use verbatim_core::{build_highlight_grammar, tokenize_words, Recognizer};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

struct CmdResult {
    code: i32,
    stdout: String,
    stderr: String,
}

fn verbatim(args: &[&str]) -> CmdResult {
    let output = Command::new(env!("CARGO_BIN_EXE_verbatim"))
        .args(args)
        .env_remove("VERBATIM_ENDPOINT")
        .output()
        .expect("binary runs");
    CmdResult {
        code: output.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&output.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&output.stderr).into_owned(),
    }
}

fn read_rows<T: serde::de::DeserializeOwned>(path: &Path) -> Vec<T> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn build_grammar_matches_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("grammar.gbnf");
    let result = verbatim(&[
        "build-grammar",
        fixture("example_post.txt").to_str().unwrap(),
        "-o",
        out.to_str().unwrap(),
    ]);
    assert_eq!(result.code, 0, "stderr: {}", result.stderr);
    assert!(result.stdout.contains("15 rules"), "{}", result.stdout);
    let written = std::fs::read(&out).unwrap();
    let golden = std::fs::read(fixture("example_post_golden.gbnf")).unwrap();
    assert_eq!(written, golden, "grammar bytes differ from golden file");
}

#[test]
fn build_grammar_rejects_empty_source() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("empty.txt");
    std::fs::write(&input, "   \n\t\n").unwrap();
    let result = verbatim(&["build-grammar", input.to_str().unwrap()]);
    assert_eq!(result.code, 2);
    assert!(result.stderr.contains("empty source"), "{}", result.stderr);
}

#[test]
fn build_grammar_rule_count_is_words_plus_three() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("big.txt");
    let words: Vec<String> = (0..1000).map(|i| format!("w{i}")).collect();
    std::fs::write(&input, words.join(" ")).unwrap();
    let out = dir.path().join("big.gbnf");
    let result = verbatim(&[
        "build-grammar",
        input.to_str().unwrap(),
        "-o",
        out.to_str().unwrap(),
    ]);
    assert_eq!(result.code, 0);
    assert!(result.stdout.contains("1003 rules"), "{}", result.stdout);
}

#[test]
fn check_accepts_and_rejects_with_offsets() {
    let grammar = fixture("example_post_golden.gbnf");
    let grammar = grammar.to_str().unwrap();

    let accept = verbatim(&["check", grammar, "[\"Recently,\"]"]);
    assert_eq!(accept.code, 0, "stderr: {}", accept.stderr);
    assert!(accept.stdout.contains("accept"));

    let out_of_order = verbatim(&[
        "check",
        grammar,
        "[\"suicide\", \"I attempted suicide\", \"medications.\", \"I attempted suicide\"]",
    ]);
    assert_eq!(out_of_order.code, 0);

    let reject = verbatim(&["check", grammar, "[\"prescription medication\"]"]);
    assert_eq!(reject.code, 1);
    assert!(
        reject.stdout.contains("reject at byte 25"),
        "{}",
        reject.stdout
    );

    let empty = verbatim(&["check", grammar, ""]);
    assert_eq!(empty.code, 1);
    assert!(empty.stdout.contains("reject at byte 0"), "{}", empty.stdout);
}

#[test]
fn extract_outputs_are_word_runs_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let out1 = dir.path().join("run1");
    let out2 = dir.path().join("run2");
    for out in [&out1, &out2] {
        let result = verbatim(&[
            "extract",
            "--posts",
            fixture("posts_3.jsonl").to_str().unwrap(),
            "--seed",
            "42",
            "--out-dir",
            out.to_str().unwrap(),
        ]);
        assert_eq!(result.code, 0, "stderr: {}", result.stderr);
    }

    let rows: Vec<HighlightRow> = read_rows(&out1.join("highlights.jsonl"));
    assert_eq!(rows.len(), 3);
    let posts: Vec<verbatim_cli::jsonl::PostRecord> = read_rows(&fixture("posts_3.jsonl"));
    for (row, post) in rows.iter().zip(&posts) {
        assert!(row.error.is_none(), "{:?}", row.error);
        assert_eq!(row.post_id, post.post_id);
        let grammar = build_highlight_grammar(&tokenize_words(&post.body).unwrap()).unwrap();
        let recognizer = Recognizer::compile(&grammar).unwrap();
        for highlight in &row.highlights {
            let as_list = format!("[\"{highlight}\"]");
            assert!(
                recognizer.accepts(as_list.as_bytes()).unwrap(),
                "highlight {highlight:?} is not a word run of post {}",
                post.post_id
            );
        }
    }

    // Same seed, byte-identical outputs.
    let bytes1 = std::fs::read(out1.join("highlights.jsonl")).unwrap();
    let bytes2 = std::fs::read(out2.join("highlights.jsonl")).unwrap();
    assert_eq!(bytes1, bytes2);
}

#[test]
fn extract_honors_config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    std::fs::write(
        &config,
        "[sampler]\nseed = 9\nmax_tokens = 48\n[run]\ndump_prompt = true\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let result = verbatim(&[
        "extract",
        "--posts",
        fixture("posts_3.jsonl").to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(result.code, 0, "stderr: {}", result.stderr);
    // dump_prompt from config file produced audit copies.
    assert!(out.join("prompts").join("a1.txt").exists());
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["sampler"]["seed"], 9);
    assert_eq!(manifest["config"]["sampler"]["max_tokens"], 48);
}

#[test]
fn summaries_start_with_priming_sentence() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let result = verbatim(&[
        "summarize",
        "--posts",
        fixture("posts_3.jsonl").to_str().unwrap(),
        "--seed",
        "7",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(result.code, 0, "stderr: {}", result.stderr);
    let rows: Vec<SummaryRow> = read_rows(&out.join("summaries.jsonl"));
    assert_eq!(rows.len(), 2); // alpha (2 posts) + beta
    for row in &rows {
        assert!(row.error.is_none());
        let priming = format!("This person is at {} risk.", row.risk_level);
        assert!(
            row.summary.starts_with(&priming),
            "summary {:?} does not start with {priming:?}",
            row.summary
        );
    }
}

#[test]
fn summarize_with_zero_max_tokens_is_exactly_the_priming() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let result = verbatim(&[
        "summarize",
        "--posts",
        fixture("posts_3.jsonl").to_str().unwrap(),
        "--max-tokens",
        "0",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(result.code, 0, "stderr: {}", result.stderr);
    let rows: Vec<SummaryRow> = read_rows(&out.join("summaries.jsonl"));
    for row in &rows {
        assert_eq!(
            row.summary,
            format!("This person is at {} risk.", row.risk_level)
        );
    }
}

#[test]
fn evaluate_self_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    // Generated files echoing the gold annotations.
    let gold_rows: Vec<serde_json::Value> = read_rows(&fixture("metrics_gold.jsonl"));
    let highlights: Vec<String> = gold_rows
        .iter()
        .map(|g| {
            serde_json::json!({
                "user_id": g["user_id"],
                "post_id": format!("{}-p", g["user_id"].as_str().unwrap()),
                "highlights": g["highlights"],
            })
            .to_string()
        })
        .collect();
    let summaries: Vec<String> = gold_rows
        .iter()
        .map(|g| {
            serde_json::json!({
                "user_id": g["user_id"],
                "risk_level": g["risk_level"],
                "summary": g["summary"],
            })
            .to_string()
        })
        .collect();
    let h_path = dir.path().join("h.jsonl");
    let s_path = dir.path().join("s.jsonl");
    std::fs::write(&h_path, highlights.join("\n") + "\n").unwrap();
    std::fs::write(&s_path, summaries.join("\n") + "\n").unwrap();

    let out = dir.path().join("out");
    let result = verbatim(&[
        "evaluate",
        "--gold",
        fixture("metrics_gold.jsonl").to_str().unwrap(),
        "--highlights",
        h_path.to_str().unwrap(),
        "--summaries",
        s_path.to_str().unwrap(),
        "--nli",
        "zero",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(result.code, 0, "stderr: {}", result.stderr);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let h = &report["overall"]["highlights"];
    for key in ["recall", "precision", "weighted_recall", "harmonic_mean"] {
        assert_eq!(h[key].as_f64().unwrap(), 1.0, "{key}");
    }
    assert_eq!(report["overall"]["summaries"]["consistency"].as_f64().unwrap(), 1.0);
    assert_eq!(report["overall"]["summaries"]["contradiction"].as_f64().unwrap(), 0.0);
}

#[test]
fn evaluate_missing_user_scores_zero_and_is_named() {
    let dir = tempfile::tempdir().unwrap();
    // Only u1 present in generated highlights.
    let h_path = dir.path().join("h.jsonl");
    std::fs::write(
        &h_path,
        "{\"user_id\":\"u1\",\"post_id\":\"p\",\"highlights\":[\"feel sad today\"]}\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let result = verbatim(&[
        "evaluate",
        "--gold",
        fixture("metrics_gold.jsonl").to_str().unwrap(),
        "--highlights",
        h_path.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(result.code, 0, "stderr: {}", result.stderr);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let warnings = report["warnings"].as_array().unwrap();
    for user in ["u2", "u3", "u4", "u5"] {
        assert!(
            warnings
                .iter()
                .any(|w| w.as_str().unwrap().contains(user)),
            "no warning names {user}"
        );
    }
    let per_user = report["per_user"].as_array().unwrap();
    let u2 = per_user.iter().find(|u| u["user_id"] == "u2").unwrap();
    assert_eq!(u2["highlights"]["recall"].as_f64().unwrap(), 0.0);
    // Summary metrics were not requested, so none appear.
    assert!(u2["summary"].is_null());
}

#[test]
fn evaluate_rejects_schema_violations_with_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, "{\"user_id\":\"u1\"}\n").unwrap();
    let result = verbatim(&[
        "evaluate",
        "--gold",
        bad.to_str().unwrap(),
        "--highlights",
        fixture("metrics_highlights.jsonl").to_str().unwrap(),
    ]);
    assert_eq!(result.code, 2);
    assert!(result.stderr.contains(":1:"), "{}", result.stderr);
}

#[test]
fn extract_highlights_revalidate_through_check_command() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let result = verbatim(&[
        "extract",
        "--posts",
        fixture("posts_3.jsonl").to_str().unwrap(),
        "--seed",
        "5",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(result.code, 0, "stderr: {}", result.stderr);

    let rows: Vec<HighlightRow> = read_rows(&out.join("highlights.jsonl"));
    let posts: Vec<verbatim_cli::jsonl::PostRecord> = read_rows(&fixture("posts_3.jsonl"));
    for (row, post) in rows.iter().zip(&posts) {
        let body_path = dir.path().join(format!("{}.txt", post.post_id));
        std::fs::write(&body_path, &post.body).unwrap();
        let grammar_path = dir.path().join(format!("{}.gbnf", post.post_id));
        let built = verbatim(&[
            "build-grammar",
            body_path.to_str().unwrap(),
            "-o",
            grammar_path.to_str().unwrap(),
        ]);
        assert_eq!(built.code, 0);
        for highlight in &row.highlights {
            let candidate = format!("[\"{highlight}\"]");
            let checked = verbatim(&["check", grammar_path.to_str().unwrap(), &candidate]);
            assert_eq!(
                checked.code, 0,
                "highlight {highlight:?} failed check for {}: {}",
                post.post_id, checked.stdout
            );
        }
    }
}

#[test]
fn per_post_failures_are_error_entries_and_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let posts = dir.path().join("posts.jsonl");
    std::fs::write(
        &posts,
        concat!(
            "{\"user_id\":\"u1\",\"post_id\":\"ok\",\"risk_level\":\"low\",\"body\":\"all good here\"}\n",
            "{\"user_id\":\"u2\",\"post_id\":\"blank\",\"risk_level\":\"low\",\"body\":\"   \"}\n",
        ),
    )
    .unwrap();
    let out = dir.path().join("out");
    let result = verbatim(&[
        "extract",
        "--posts",
        posts.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(result.code, 1, "stderr: {}", result.stderr);
    let rows: Vec<HighlightRow> = read_rows(&out.join("highlights.jsonl"));
    assert_eq!(rows.len(), 2);
    assert!(rows[0].error.is_none());
    assert!(rows[1].error.is_some());
    assert!(rows[1].highlights.is_empty());
    assert!(result.stderr.contains("blank"), "{}", result.stderr);
}

#[test]
fn endpoint_env_var_overrides_config() {
    let output = Command::new(env!("CARGO_BIN_EXE_verbatim"))
        .args([
            "extract",
            "--posts",
            fixture("posts_3.jsonl").to_str().unwrap(),
            "--backend",
            "remote",
        ])
        .env("VERBATIM_ENDPOINT", "http://127.0.0.1:1")
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("127.0.0.1:1"), "{stderr}");
}

#[test]
fn check_rejects_malformed_grammar_file_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let grammar = dir.path().join("bad.gbnf");
    std::fs::write(&grammar, "root ::= [a-z]\n").unwrap();
    let result = verbatim(&["check", grammar.to_str().unwrap(), "x"]);
    assert_eq!(result.code, 2);
    assert!(result.stderr.contains("unsupported"), "{}", result.stderr);
}

#[test]
fn unreachable_remote_backend_fails_fast_with_exit_2() {
    let result = verbatim(&[
        "extract",
        "--posts",
        fixture("posts_3.jsonl").to_str().unwrap(),
        "--backend",
        "remote",
        "--endpoint",
        "http://127.0.0.1:1",
    ]);
    assert_eq!(result.code, 2);
    assert!(
        result.stderr.contains("handshake"),
        "stderr: {}",
        result.stderr
    );
}
