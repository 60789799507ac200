//! One-shot prompt assembly for both tasks, rendered in multiple chat
//! formats.
//!
//! The default assets embed the published example (a high-risk comment with
//! its highlight list and summary); user-supplied replacements load from a
//! directory via [`PromptAssets::load_dir`]. The summary prompt ends with a
//! priming sentence inside the open assistant turn, which the model must
//! continue and which stays part of the final summary downstream.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::risk::RiskLevel;

#[derive(Debug, Clone, thiserror::Error)]
pub enum PromptError {
    #[error("comment text is empty")]
    EmptyComment,
    #[error("no comments provided for summary prompt")]
    EmptyComments,
    #[error("failed to load prompt asset `{path}`: {source}")]
    Asset {
        path: String,
        #[source]
        source: std::sync::Arc<std::io::Error>,
    },
    #[error("unknown chat template `{0}` (expected one of: chatml, openchat, plain)")]
    UnknownTemplate(String),
    #[error(transparent)]
    Risk(#[from] crate::risk::ParseRiskLevelError),
}

/// A worked example embedded before the real request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptExample {
    pub risk: RiskLevel,
    pub comment: String,
    pub response: String,
}

/// Text assets the prompt builders draw from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptAssets {
    pub highlight_system: String,
    pub highlight_examples: Vec<PromptExample>,
    pub summary_system: String,
    pub summary_examples: Vec<PromptExample>,
}

impl Default for PromptAssets {
    fn default() -> Self {
        PromptAssets {
            highlight_system: include_str!("../assets/highlight_system.txt").trim_end().into(),
            highlight_examples: vec![PromptExample {
                risk: RiskLevel::High,
                comment: include_str!("../assets/highlight_example_comment.txt")
                    .trim_end()
                    .into(),
                response: include_str!("../assets/highlight_example_response.txt")
                    .trim_end()
                    .into(),
            }],
            summary_system: include_str!("../assets/summary_system.txt").trim_end().into(),
            summary_examples: vec![PromptExample {
                risk: RiskLevel::High,
                comment: include_str!("../assets/summary_example_comment.txt")
                    .trim_end()
                    .into(),
                response: include_str!("../assets/summary_example_response.txt")
                    .trim_end()
                    .into(),
            }],
        }
    }
}

impl PromptAssets {
    /// Load assets from a directory, falling back to the built-in text for
    /// any missing piece.
    ///
    /// Layout: `highlight_system.txt`, `summary_system.txt`, and
    /// `highlight_examples/<name>/{risk,comment,response}.txt` (same for
    /// `summary_examples/`), examples sorted by subdirectory name.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self, PromptError> {
        let dir = dir.as_ref();
        let mut assets = PromptAssets::default();
        if let Some(text) = read_optional(&dir.join("highlight_system.txt"))? {
            assets.highlight_system = text;
        }
        if let Some(text) = read_optional(&dir.join("summary_system.txt"))? {
            assets.summary_system = text;
        }
        if let Some(examples) = load_examples(&dir.join("highlight_examples"))? {
            assets.highlight_examples = examples;
        }
        if let Some(examples) = load_examples(&dir.join("summary_examples"))? {
            assets.summary_examples = examples;
        }
        Ok(assets)
    }
}

fn read_optional(path: &Path) -> Result<Option<String>, PromptError> {
    match std::fs::read_to_string(path) {
        Ok(text) => Ok(Some(text.trim_end().to_string())),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(PromptError::Asset {
            path: path.display().to_string(),
            source: std::sync::Arc::new(e),
        }),
    }
}

fn read_required(path: &Path) -> Result<String, PromptError> {
    read_optional(path)?.ok_or_else(|| PromptError::Asset {
        path: path.display().to_string(),
        source: std::sync::Arc::new(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            "file not found",
        )),
    })
}

fn load_examples(dir: &Path) -> Result<Option<Vec<PromptExample>>, PromptError> {
    if !dir.is_dir() {
        return Ok(None);
    }
    let mut names: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| PromptError::Asset {
            path: dir.display().to_string(),
            source: std::sync::Arc::new(e),
        })?
        .filter_map(|entry| entry.ok())
        .filter(|entry| entry.path().is_dir())
        .map(|entry| entry.path())
        .collect();
    names.sort();
    let mut examples = Vec::new();
    for sub in names {
        examples.push(PromptExample {
            risk: read_required(&sub.join("risk.txt"))?.parse()?,
            comment: read_required(&sub.join("comment.txt"))?,
            response: read_required(&sub.join("response.txt"))?,
        });
    }
    Ok(Some(examples))
}

/// A role-tagged prompt with closed example turns and an open assistant turn.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskPrompt {
    pub system_text: String,
    /// `(user_text, assistant_text)` pairs, already formatted.
    pub examples: Vec<(String, String)>,
    pub target_user_text: String,
    pub target_risk_level: RiskLevel,
    /// Placed inside the open assistant turn for the model to continue.
    pub priming_prefix: Option<String>,
}

fn user_turn(risk: RiskLevel, text: &str) -> String {
    format!("Risk level: {risk}\nText: {text}")
}

/// Assemble the highlight-extraction prompt for one comment.
pub fn build_highlight_prompt(
    assets: &PromptAssets,
    risk: RiskLevel,
    comment: &str,
) -> Result<TaskPrompt, PromptError> {
    if comment.trim().is_empty() {
        return Err(PromptError::EmptyComment);
    }
    Ok(TaskPrompt {
        system_text: assets.highlight_system.clone(),
        examples: assets
            .highlight_examples
            .iter()
            .map(|ex| (user_turn(ex.risk, &ex.comment), ex.response.clone()))
            .collect(),
        target_user_text: user_turn(risk, comment),
        target_risk_level: risk,
        priming_prefix: None,
    })
}

/// Assemble the summarization prompt for a user's comments.
///
/// Multiple comments are concatenated with `[post k]` headers and blank-line
/// separators; a single comment is passed through as-is. The priming sentence
/// names the preassigned risk level and is part of the final summary.
pub fn build_summary_prompt(
    assets: &PromptAssets,
    risk: RiskLevel,
    comments: &[String],
) -> Result<TaskPrompt, PromptError> {
    if comments.is_empty() || comments.iter().all(|c| c.trim().is_empty()) {
        return Err(PromptError::EmptyComments);
    }
    let joined = if comments.len() == 1 {
        comments[0].clone()
    } else {
        comments
            .iter()
            .enumerate()
            .map(|(i, c)| format!("[post {}]\n{c}", i + 1))
            .collect::<Vec<_>>()
            .join("\n\n")
    };
    Ok(TaskPrompt {
        system_text: assets.summary_system.clone(),
        examples: assets
            .summary_examples
            .iter()
            .map(|ex| (user_turn(ex.risk, &ex.comment), ex.response.clone()))
            .collect(),
        target_user_text: user_turn(risk, &joined),
        target_risk_level: risk,
        priming_prefix: Some(format!("This person is at {risk} risk.")),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemplateKind {
    ChatML,
    OpenChat,
    Plain,
}

impl fmt::Display for TemplateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TemplateKind::ChatML => "chatml",
            TemplateKind::OpenChat => "openchat",
            TemplateKind::Plain => "plain",
        })
    }
}

impl FromStr for TemplateKind {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "chatml" => Ok(TemplateKind::ChatML),
            "openchat" => Ok(TemplateKind::OpenChat),
            "plain" => Ok(TemplateKind::Plain),
            other => Err(PromptError::UnknownTemplate(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct RoleMarkers {
    begin: &'static str,
    end: &'static str,
}

/// Chat-format renderer: per-role begin/end markers plus the open-assistant
/// marker the completion continues from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatTemplate {
    kind: TemplateKind,
    system: RoleMarkers,
    user: RoleMarkers,
    assistant: RoleMarkers,
    assistant_open: &'static str,
    priming_joiner: &'static str,
    system_role_supported: bool,
}

impl ChatTemplate {
    pub fn new(kind: TemplateKind) -> Self {
        match kind {
            TemplateKind::ChatML => ChatTemplate {
                kind,
                system: RoleMarkers {
                    begin: "<|im_start|>system\n",
                    end: "<|im_end|>\n",
                },
                user: RoleMarkers {
                    begin: "<|im_start|>user\n",
                    end: "<|im_end|>\n",
                },
                assistant: RoleMarkers {
                    begin: "<|im_start|>assistant\n",
                    end: "<|im_end|>\n",
                },
                assistant_open: "<|im_start|>assistant\n",
                priming_joiner: "",
                system_role_supported: true,
            },
            TemplateKind::OpenChat => ChatTemplate {
                kind,
                system: RoleMarkers { begin: "", end: "" },
                user: RoleMarkers {
                    begin: "GPT4 User: ",
                    end: "<|end_of_turn|>",
                },
                assistant: RoleMarkers {
                    begin: "GPT4 Assistant: ",
                    end: "<|end_of_turn|>",
                },
                assistant_open: "GPT4 Assistant:",
                priming_joiner: " ",
                system_role_supported: false,
            },
            TemplateKind::Plain => ChatTemplate {
                kind,
                system: RoleMarkers {
                    begin: "### System:\n",
                    end: "\n\n",
                },
                user: RoleMarkers {
                    begin: "### User:\n",
                    end: "\n\n",
                },
                assistant: RoleMarkers {
                    begin: "### Assistant:\n",
                    end: "\n\n",
                },
                assistant_open: "### Assistant:\n",
                priming_joiner: "",
                system_role_supported: true,
            },
        }
    }

    pub fn kind(&self) -> TemplateKind {
        self.kind
    }

    pub fn system_role_supported(&self) -> bool {
        self.system_role_supported
    }

    /// Render the prompt deterministically. Closed turns are wrapped in their
    /// role markers; the final assistant turn is opened but not closed, with
    /// the priming prefix (if any) appended and no trailing whitespace. For
    /// formats without a system tag the system text is prepended to the first
    /// user turn.
    pub fn render(&self, prompt: &TaskPrompt) -> String {
        let mut user_texts: Vec<String> = Vec::new();
        for (user_text, _) in &prompt.examples {
            user_texts.push(user_text.clone());
        }
        user_texts.push(prompt.target_user_text.clone());

        let mut out = String::new();
        if self.system_role_supported {
            out.push_str(self.system.begin);
            out.push_str(&prompt.system_text);
            out.push_str(self.system.end);
        } else {
            user_texts[0] = format!("{}\n{}", prompt.system_text, user_texts[0]);
        }
        for (i, user_text) in user_texts.iter().enumerate() {
            out.push_str(self.user.begin);
            out.push_str(user_text);
            out.push_str(self.user.end);
            if let Some((_, assistant_text)) = prompt.examples.get(i) {
                out.push_str(self.assistant.begin);
                out.push_str(assistant_text);
                out.push_str(self.assistant.end);
            }
        }
        out.push_str(self.assistant_open);
        if let Some(priming) = &prompt.priming_prefix {
            out.push_str(self.priming_joiner);
            out.push_str(priming);
        }
        out
    }
}
