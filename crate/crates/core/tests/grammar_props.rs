//! Property tests for grammar construction, serialization, and recognition.

use proptest::prelude::*;
use verbatim_core::{
    accepts_string, build_highlight_grammar, parse_gbnf, tokenize_words, Recognizer,
    SourceTokenization, Vocabulary,
};

fn word_strategy() -> impl Strategy<Value = String> {
    // Includes punctuation-, quote-, and backslash-bearing shapes.
    prop_oneof![
        "[a-z]{1,6}",
        "[a-z]{1,4}\\.",
        "[a-z]{1,4},",
        "[a-z]{1,3}\"[a-z]{1,2}",
        "[a-z]{1,3}\\\\[a-z]{1,2}",
    ]
}

fn source_strategy(max_words: usize) -> impl Strategy<Value = SourceTokenization> {
    prop::collection::vec(word_strategy(), 1..=max_words).prop_map(|words| {
        let text = words.join(" ");
        tokenize_words(&text).expect("nonempty")
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn built_grammars_round_trip_through_serialization(src in source_strategy(10)) {
        let grammar = build_highlight_grammar(&src).unwrap();
        let text = verbatim_core::grammar::serialize_gbnf(&grammar);
        let reparsed = parse_gbnf(&text).unwrap();
        prop_assert_eq!(reparsed, grammar);
    }

    #[test]
    fn single_runs_are_always_accepted(src in source_strategy(8), start in 0usize..8, len in 1usize..4) {
        let n = src.words.len();
        let start = start % n;
        let end = (start + len).min(n);
        let run = src.words[start..end].join(" ");
        let grammar = build_highlight_grammar(&src).unwrap();
        let candidate = format!("[\"{run}\"]");
        prop_assert!(accepts_string(&grammar, candidate.as_bytes()).unwrap());
    }

    #[test]
    fn prefix_monotonicity(src in source_strategy(6), cut in 0usize..40) {
        let grammar = build_highlight_grammar(&src).unwrap();
        let recognizer = Recognizer::compile(&grammar).unwrap();
        let full = format!("[\"{}\", \"{}\"]", src.words.join(" "), src.words[0]);
        let bytes = full.as_bytes();
        let cut = cut.min(bytes.len());
        // The full string is consumable, so every prefix must be too.
        let whole = recognizer.advance_bytes(&recognizer.initial_state(), bytes).unwrap();
        prop_assert!(!whole.is_rejected());
        let prefix = recognizer.advance_bytes(&recognizer.initial_state(), &bytes[..cut]).unwrap();
        prop_assert!(!prefix.is_rejected());
    }

    #[test]
    fn chunked_advance_equals_bytewise(src in source_strategy(5), split in 1usize..30) {
        let grammar = build_highlight_grammar(&src).unwrap();
        let recognizer = Recognizer::compile(&grammar).unwrap();
        let text = format!("[\"{}\"]", src.words.join(" "));
        let bytes = text.as_bytes();
        let split = split.min(bytes.len());
        let chunked = {
            let mid = recognizer.advance_bytes(&recognizer.initial_state(), &bytes[..split]).unwrap();
            recognizer.advance_bytes(&mid, &bytes[split..]).unwrap()
        };
        let whole = recognizer.advance_bytes(&recognizer.initial_state(), bytes).unwrap();
        prop_assert_eq!(chunked, whole);
    }

    #[test]
    fn trie_mask_always_equals_naive_mask(
        src in source_strategy(4),
        tokens in prop::collection::vec("[a-z\\]\\[\", ]{1,6}", 1..24),
        prefix_items in 0usize..2,
    ) {
        let grammar = build_highlight_grammar(&src).unwrap();
        let recognizer = Recognizer::compile(&grammar).unwrap();
        let mut bytes: Vec<Vec<u8>> = tokens.into_iter().map(String::into_bytes).collect();
        bytes.push(Vec::new());
        let eos = bytes.len() as u32 - 1;
        let vocabulary = Vocabulary::new(bytes, eos).unwrap();

        // Walk to a valid mid-string state.
        let mut text = format!("[\"{}\"", src.words[0]);
        if prefix_items == 1 {
            text.push_str(&format!(", \"{}\"", src.words[src.words.len() - 1]));
        }
        let state = recognizer
            .advance_bytes(&recognizer.initial_state(), text.as_bytes())
            .unwrap();
        prop_assert!(!state.is_rejected());
        let fast = recognizer.allowed_token_mask(&state, &vocabulary).unwrap();
        let slow = recognizer.allowed_token_mask_naive(&state, &vocabulary).unwrap();
        prop_assert_eq!(fast, slow);
    }
}

#[test]
fn escaping_soundness_for_quote_and_backslash_words() {
    let text = r#"say "hi" and back\slash now"#;
    let src = tokenize_words(text).unwrap();
    let grammar = build_highlight_grammar(&src).unwrap();
    let serialized = verbatim_core::grammar::serialize_gbnf(&grammar);
    let reparsed = parse_gbnf(&serialized).unwrap();
    assert_eq!(reparsed, grammar);
    // The quoted word is matchable byte-for-byte.
    let candidate = format!("[\"{}\"]", r#""hi""#);
    assert!(accepts_string(&grammar, candidate.as_bytes()).unwrap());
}
