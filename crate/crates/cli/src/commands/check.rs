use std::path::PathBuf;

use clap::Args;
use verbatim_core::{parse_gbnf, Recognizer};

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// GBNF grammar file.
    pub grammar: PathBuf,
    /// Candidate string (mutually exclusive with --file).
    pub candidate: Option<String>,
    /// Read the candidate bytes from a file instead.
    #[arg(long, conflicts_with = "candidate")]
    pub file: Option<PathBuf>,
}

pub fn run(args: CheckArgs) -> anyhow::Result<i32> {
    let grammar_text = std::fs::read_to_string(&args.grammar)
        .map_err(|e| anyhow::anyhow!("cannot read {}: {e}", args.grammar.display()))?;
    let grammar = parse_gbnf(&grammar_text)?;
    let recognizer = Recognizer::compile(&grammar)?;

    let bytes: Vec<u8> = match (&args.candidate, &args.file) {
        (Some(candidate), None) => candidate.clone().into_bytes(),
        (None, Some(path)) => std::fs::read(path)
            .map_err(|e| anyhow::anyhow!("cannot read {}: {e}", path.display()))?,
        (None, None) => anyhow::bail!("provide a candidate string or --file"),
        (Some(_), Some(_)) => unreachable!("clap enforces exclusivity"),
    };

    match recognizer.first_rejection(&bytes)? {
        Some(offset) => {
            println!("reject at byte {offset}");
            Ok(1)
        }
        None => {
            let state = recognizer.advance_bytes(&recognizer.initial_state(), &bytes)?;
            if recognizer.accepts_end(&state) {
                println!("accept");
                Ok(0)
            } else {
                // Every byte was consumable but the sentence is incomplete.
                println!("reject at byte {} (incomplete)", bytes.len());
                Ok(1)
            }
        }
    }
}
