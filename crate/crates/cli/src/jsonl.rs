//! JSONL input/output: one JSON object per line, UTF-8, no BOM.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use verbatim_core::RiskLevel;

/// One input post.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostRecord {
    pub user_id: String,
    pub post_id: String,
    pub risk_level: RiskLevel,
    pub body: String,
}

/// One `extract` output row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HighlightRow {
    pub user_id: String,
    pub post_id: String,
    pub highlights: Vec<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub truncated: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// One `summarize` output row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub user_id: String,
    pub risk_level: RiskLevel,
    pub summary: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// One gold-annotation row for `evaluate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldRecord {
    pub user_id: String,
    pub risk_level: RiskLevel,
    #[serde(default)]
    pub highlights: Vec<String>,
    #[serde(default)]
    pub summary: String,
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> anyhow::Result<Vec<T>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| anyhow::anyhow!("cannot read {}: {e}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let item: T = serde_json::from_str(line)
            .map_err(|e| anyhow::anyhow!("{}:{}: invalid record: {e}", path.display(), i + 1))?;
        out.push(item);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> anyhow::Result<()> {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item)?);
        out.push('\n');
    }
    std::fs::write(path, out)
        .map_err(|e| anyhow::anyhow!("cannot write {}: {e}", path.display()))?;
    Ok(())
}

pub fn read_posts(path: &Path) -> anyhow::Result<Vec<PostRecord>> {
    let posts: Vec<PostRecord> = read_jsonl(path)?;
    for (i, post) in posts.iter().enumerate() {
        if post.user_id.is_empty() || post.post_id.is_empty() {
            anyhow::bail!(
                "{}: record {} has an empty user_id or post_id",
                path.display(),
                i + 1
            );
        }
    }
    Ok(posts)
}
