use std::path::PathBuf;

use clap::Args;
use verbatim_core::{build_highlight_grammar, grammar::serialize_gbnf, tokenize_words};

#[derive(Debug, Args)]
pub struct BuildGrammarArgs {
    /// Source text file (UTF-8).
    pub input: PathBuf,
    /// Output GBNF path; defaults to the input with a .gbnf extension.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

pub fn run(args: BuildGrammarArgs) -> anyhow::Result<i32> {
    let text = std::fs::read_to_string(&args.input)
        .map_err(|e| anyhow::anyhow!("cannot read {}: {e}", args.input.display()))?;
    let source = tokenize_words(&text)?;
    let grammar = build_highlight_grammar(&source)?;
    let output = args
        .output
        .unwrap_or_else(|| args.input.with_extension("gbnf"));
    std::fs::write(&output, serialize_gbnf(&grammar))
        .map_err(|e| anyhow::anyhow!("cannot write {}: {e}", output.display()))?;
    println!("{} rules written to {}", grammar.rule_count(), output.display());
    Ok(0)
}
