//! Command-line pipeline: ingest posts, build grammars, run constrained
//! extraction and primed summarization against a backend, evaluate against
//! gold annotations, and persist reproducible run manifests.
//!
//! Exit codes: 0 on success, 1 when some items failed (or `check` rejects),
//! 2 on configuration/handshake errors.

pub mod commands;
pub mod config;
pub mod jsonl;
pub mod listparse;
pub mod manifest;
pub mod runtime;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "verbatim",
    version,
    about = "Grammar-constrained highlight extraction, primed summarization, and evaluation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compile a source text file into a highlight-extraction GBNF grammar.
    BuildGrammar(commands::build_grammar::BuildGrammarArgs),
    /// Extract grammar-constrained highlights for every post.
    Extract(commands::extract::ExtractArgs),
    /// Generate risk-primed summaries per user.
    Summarize(commands::summarize::SummarizeArgs),
    /// Score generated highlights/summaries against gold annotations.
    Evaluate(commands::evaluate::EvaluateArgs),
    /// Test whether a candidate string is accepted by a GBNF grammar.
    Check(commands::check::CheckArgs),
}

pub fn run(cli: Cli) -> anyhow::Result<i32> {
    match cli.command {
        Command::BuildGrammar(args) => commands::build_grammar::run(args),
        Command::Extract(args) => commands::extract::run(args),
        Command::Summarize(args) => commands::summarize::run(args),
        Command::Evaluate(args) => commands::evaluate::run(args),
        Command::Check(args) => commands::check::run(args),
    }
}

/// Derive a per-item seed from the run seed and the item id (FNV-1a 64 over
/// the seed's little-endian bytes followed by the id bytes). Recorded in the
/// manifest as `fnv1a64`.
pub fn derive_item_seed(run_seed: u64, item_id: &str) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut hash = OFFSET;
    for byte in run_seed.to_le_bytes().into_iter().chain(item_id.bytes()) {
        hash ^= u64::from(byte);
        hash = hash.wrapping_mul(PRIME);
    }
    hash
}
