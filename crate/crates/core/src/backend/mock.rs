//! Deterministic n-gram mock backend.
//!
//! The vocabulary is derived from a training corpus: line-initial words keep
//! their bare form, every other word is stored with its single leading space,
//! plus a distinguished empty-bytes EOS. Identical corpus/order/smoothing
//! always yields identical logits for every context, so decode runs are
//! reproducible byte for byte.

use std::collections::HashMap;

use crate::backend::{BackendDescriptor, BackendError, BackendKind, LmBackend};
use crate::recognizer::Vocabulary;
use crate::sampler::LogitVector;

/// Finite stand-in for log(0) when smoothing is zero. Far below any real
/// log-probability, and exp() underflows it to exactly 0 in f64, so the
/// softmax still reproduces the n-gram distribution exactly.
const ZERO_PROB_LOGIT: f64 = -1.0e4;

/// Per-token counts and the window total for one context.
type ContextCounts = HashMap<Vec<u32>, (HashMap<u32, u64>, u64)>;

/// Add-k smoothed n-gram table over mock-vocabulary token ids.
#[derive(Debug)]
struct NgramTable {
    order: usize,
    /// `counts[j]` maps a length-`j` context window to its counts.
    counts: Vec<ContextCounts>,
    smoothing: f64,
}

#[derive(Debug)]
pub struct MockNgramBackend {
    vocabulary: Vocabulary,
    table: NgramTable,
    /// Exact token bytes -> id, for greedy form lookup during tokenize.
    form_ids: HashMap<Vec<u8>, u32>,
    label: String,
}

impl MockNgramBackend {
    /// Build from a whitespace-tokenized corpus.
    ///
    /// `order` >= 1 is the n-gram order (1 = unigram); `smoothing` is the
    /// add-k constant. An unseen context with k = 0 falls back to the uniform
    /// distribution, never a zero vector.
    pub fn from_corpus(corpus: &str, order: usize, smoothing: f64) -> Result<Self, BackendError> {
        if order == 0 {
            return Err(BackendError::InvalidConfig(
                "n-gram order must be at least 1".into(),
            ));
        }
        if smoothing.is_nan() || smoothing < 0.0 {
            return Err(BackendError::InvalidConfig(format!(
                "smoothing must be >= 0, got {smoothing}"
            )));
        }

        // First pass: vocabulary in first-appearance order.
        let mut form_ids: HashMap<Vec<u8>, u32> = HashMap::new();
        let mut tokens: Vec<Vec<u8>> = Vec::new();
        let mut line_streams: Vec<Vec<u32>> = Vec::new();
        for line in corpus.lines() {
            let mut stream = Vec::new();
            for (i, word) in line.split_whitespace().enumerate() {
                let form = if i == 0 {
                    word.as_bytes().to_vec()
                } else {
                    let mut spaced = Vec::with_capacity(word.len() + 1);
                    spaced.push(b' ');
                    spaced.extend_from_slice(word.as_bytes());
                    spaced
                };
                let id = *form_ids.entry(form.clone()).or_insert_with(|| {
                    tokens.push(form);
                    tokens.len() as u32 - 1
                });
                stream.push(id);
            }
            if !stream.is_empty() {
                line_streams.push(stream);
            }
        }
        if tokens.is_empty() {
            return Err(BackendError::EmptyCorpus);
        }
        tokens.push(Vec::new()); // EOS
        let eos_id = tokens.len() as u32 - 1;

        // Second pass: counts for every context length 0..order, with EOS
        // observed at the end of each line.
        let mut counts: Vec<ContextCounts> = (0..order).map(|_| HashMap::new()).collect();
        for stream in &mut line_streams {
            stream.push(eos_id);
            for (level, table) in counts.iter_mut().enumerate() {
                for i in level..stream.len() {
                    let context = stream[i - level..i].to_vec();
                    let entry = table.entry(context).or_default();
                    *entry.0.entry(stream[i]).or_default() += 1;
                    entry.1 += 1;
                }
            }
        }

        Ok(MockNgramBackend {
            vocabulary: Vocabulary::new(tokens, eos_id)?,
            table: NgramTable {
                order,
                counts,
                smoothing,
            },
            form_ids,
            label: format!("mock-ngram(order={order}, k={smoothing})"),
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Smoothed next-token distribution for a context; sums to 1.
    pub fn distribution(&self, context: &[u32]) -> Vec<f64> {
        let v = self.vocabulary.len() as f64;
        let level = self.table.order.saturating_sub(1).min(context.len());
        let window = &context[context.len() - level..];
        let k = self.table.smoothing;
        match self.table.counts[level].get(window) {
            Some((per_token, total)) if *total > 0 => (0..self.vocabulary.len() as u32)
                .map(|id| {
                    let count = per_token.get(&id).copied().unwrap_or(0) as f64;
                    if k == 0.0 {
                        count / *total as f64
                    } else {
                        (count + k) / (*total as f64 + k * v)
                    }
                })
                .collect(),
            // Unseen context: uniform, regardless of k (with k > 0 the
            // smoothing formula reduces to exactly this).
            _ => vec![1.0 / v; self.vocabulary.len()],
        }
    }

    fn form_id(&self, bytes: &[u8]) -> Option<u32> {
        self.form_ids.get(bytes).copied()
    }
}

impl LmBackend for MockNgramBackend {
    fn next_logits(&self, context: &[u32]) -> Result<LogitVector, BackendError> {
        for &id in context {
            if id as usize >= self.vocabulary.len() {
                return Err(BackendError::InvalidTokenId {
                    id,
                    vocab_size: self.vocabulary.len(),
                });
            }
        }
        let scores = self
            .distribution(context)
            .into_iter()
            .map(|p| if p > 0.0 { p.ln() } else { ZERO_PROB_LOGIT })
            .collect();
        Ok(LogitVector::new(scores))
    }

    /// Whitespace tokenization against the corpus vocabulary: the first word
    /// uses its bare form, later words their space-prefixed form, falling
    /// back to the other form when only that one was observed. Unknown words
    /// are an error.
    fn tokenize(&self, text: &str) -> Result<Vec<u32>, BackendError> {
        let mut out = Vec::new();
        for (i, word) in text.split_whitespace().enumerate() {
            let bare = word.as_bytes();
            let mut spaced = Vec::with_capacity(word.len() + 1);
            spaced.push(b' ');
            spaced.extend_from_slice(bare);
            let id = if i == 0 {
                self.form_id(bare).or_else(|| self.form_id(&spaced))
            } else {
                self.form_id(&spaced).or_else(|| self.form_id(bare))
            };
            match id {
                Some(id) => out.push(id),
                None => {
                    return Err(BackendError::UnknownWord {
                        word: word.to_string(),
                    })
                }
            }
        }
        Ok(out)
    }

    fn detokenize(&self, ids: &[u32]) -> Result<Vec<u8>, BackendError> {
        let mut out = Vec::new();
        for &id in ids {
            if id as usize >= self.vocabulary.len() {
                return Err(BackendError::InvalidTokenId {
                    id,
                    vocab_size: self.vocabulary.len(),
                });
            }
            out.extend_from_slice(self.vocabulary.token_bytes(id));
        }
        Ok(out)
    }

    fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    fn descriptor(&self) -> BackendDescriptor {
        BackendDescriptor {
            kind: BackendKind::MockNgram,
            model_label: self.label.clone(),
            vocab_size: self.vocabulary.len(),
        }
    }
}

/// Synthesize a mock training corpus that makes grammar-constrained decoding
/// over the given source texts viable: for every word the bracketed-list
/// forms `["w",`, `["w"]`, ` "w",`, ` "w"]` all become vocabulary tokens, so
/// from any recognizer state some token is consumable. The raw texts are
/// appended so prompts built from them tokenize too.
pub fn mock_corpus_from_texts<'a>(texts: impl IntoIterator<Item = &'a str>) -> String {
    let mut corpus = String::new();
    let mut seen: std::collections::HashSet<&str> = std::collections::HashSet::new();
    let mut raw_lines: Vec<&str> = Vec::new();
    for text in texts {
        for word in text.split_whitespace() {
            if !seen.insert(word) {
                continue;
            }
            // Line-initial occurrences provide the bare `["w"...` forms,
            // later ones the space-prefixed item forms.
            corpus.push_str(&format!("[\"{word}\", \"{word}\", \"{word}\"]\n"));
            corpus.push_str(&format!("[\"{word}\"]\n"));
        }
        raw_lines.push(text);
    }
    for text in raw_lines {
        corpus.push_str(text);
        corpus.push('\n');
    }
    corpus
}
