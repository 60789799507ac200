//! Next-token-logits providers.
//!
//! Everything above this trait treats the language model as an opaque logits
//! service: [`MockNgramBackend`] is a deterministic n-gram double for
//! desk-scale testing and CI, [`RemoteBackend`] talks JSON-over-HTTP to a
//! local model server (protocol in `docs/remote-protocol.md`).

mod mock;
mod remote;

pub use mock::{mock_corpus_from_texts, MockNgramBackend};
pub use remote::{RemoteBackend, RemoteConfig};

use serde::{Deserialize, Serialize};

use crate::recognizer::{Vocabulary, VocabularyError};
use crate::sampler::LogitVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    MockNgram,
    Remote,
}

/// What a backend is, for run manifests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendDescriptor {
    pub kind: BackendKind,
    pub model_label: String,
    pub vocab_size: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    #[error("empty corpus: no tokens to build a backend from")]
    EmptyCorpus,
    #[error("invalid backend config: {0}")]
    InvalidConfig(String),
    #[error("cannot tokenize `{word}`: not in the mock vocabulary")]
    UnknownWord { word: String },
    #[error("token id {id} out of range for vocabulary of {vocab_size} tokens")]
    InvalidTokenId { id: u32, vocab_size: usize },
    #[error("http error talking to `{endpoint}`: {source}")]
    Http {
        endpoint: String,
        #[source]
        source: reqwest::Error,
    },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("handshake rejected: {0}")]
    Handshake(String),
    #[error("server returned {got} logits, expected vocabulary size {expected}")]
    WrongLogitsLength { expected: usize, got: usize },
    #[error(transparent)]
    Vocabulary(#[from] VocabularyError),
}

/// Abstract next-token-logits provider.
///
/// Implementations must be safe for concurrent `next_logits` calls from
/// independent decodes.
pub trait LmBackend: Send + Sync {
    /// Scores for every vocabulary token given the context. All entries are
    /// finite; masking is the sampler's job.
    fn next_logits(&self, context: &[u32]) -> Result<LogitVector, BackendError>;

    fn tokenize(&self, text: &str) -> Result<Vec<u32>, BackendError>;

    /// Concatenation of token bytes: `detokenize(a+b) = detokenize(a) + detokenize(b)`.
    fn detokenize(&self, ids: &[u32]) -> Result<Vec<u8>, BackendError>;

    fn vocabulary(&self) -> &Vocabulary;

    fn descriptor(&self) -> BackendDescriptor;
}
