//! Grammar-constrained highlight extraction and summary evaluation toolkit.
//!
//! The crate compiles a source text into a formal grammar whose language is
//! exactly the bracketed lists of verbatim word runs from that text, steps an
//! incremental recognizer over emitted bytes to mask a vocabulary at every
//! decode step, runs a nucleus-sampling pipeline against any logits backend,
//! renders the one-shot chat prompts for both tasks, and scores generated
//! highlights/summaries against gold annotations.
//!
//! The pieces compose but stand alone: [`grammar`] and [`recognizer`] know
//! nothing about language models, [`sampler`] only needs a
//! [`backend::LmBackend`], and [`metrics`] only needs scorer implementations.

pub mod backend;
pub mod bitset;
pub mod grammar;
pub mod metrics;
pub mod prompting;
pub mod recognizer;
pub mod risk;
pub mod sampler;

pub use backend::{BackendDescriptor, BackendError, LmBackend, MockNgramBackend, RemoteBackend};
pub use grammar::{
    build_highlight_grammar, parse_gbnf, tokenize_words, Element, Grammar, GrammarError,
    Repetition, SourceTokenization,
};
pub use metrics::{EvidenceRecord, MetricsConfig, MetricsReport, NliScorer, SimilarityScorer};
pub use prompting::{ChatTemplate, PromptAssets, PromptError, TaskPrompt, TemplateKind};
pub use recognizer::{
    accepts_string, Recognizer, RecognizerError, RecognizerState, TokenMask, Vocabulary,
};
pub use risk::RiskLevel;
pub use sampler::{
    decode_constrained, sample_token, top_p_filter, DecodeOutput, LogitVector, SamplerConfig,
    SamplerError, StopReason,
};
