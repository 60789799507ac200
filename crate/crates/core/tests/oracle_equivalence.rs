//! Recognizer-vs-oracle equivalence on small sources.
//!
//! The oracle is an independent string-level matcher: a candidate is in the
//! language iff it renders as `[` + comma-space-joined quoted word runs + `]`
//! for some sequence of contiguous runs. It backtracks over every run at
//! every position, so quote-bearing words cannot fool it.

use verbatim_core::{accepts_string, build_highlight_grammar, tokenize_words, Recognizer};

pub fn rendered_runs(words: &[String]) -> Vec<Vec<u8>> {
    let mut runs = Vec::new();
    for start in 0..words.len() {
        for end in start + 1..=words.len() {
            let mut rendered = vec![b'"'];
            rendered.extend_from_slice(words[start..end].join(" ").as_bytes());
            if end == words.len() {
                // The construction ends in `tn ::= ""` behind an optional
                // `(" " tn)?`, so a run reaching the last word may carry one
                // trailing space.
                let mut spaced = rendered.clone();
                spaced.push(b' ');
                spaced.push(b'"');
                runs.push(spaced);
            }
            rendered.push(b'"');
            runs.push(rendered);
        }
    }
    runs
}

pub fn oracle_accepts(words: &[String], candidate: &[u8]) -> bool {
    fn items_from(runs: &[Vec<u8>], candidate: &[u8], pos: usize) -> bool {
        for run in runs {
            if candidate[pos..].starts_with(run) {
                let after = pos + run.len();
                if candidate[after..] == *b"]" {
                    return true;
                }
                if candidate[after..].starts_with(b", ") && items_from(runs, candidate, after + 2)
                {
                    return true;
                }
            }
        }
        false
    }
    let runs = rendered_runs(words);
    candidate.starts_with(b"[") && items_from(&runs, candidate, 1)
}

#[test]
fn oracle_agrees_on_handpicked_cases() {
    let words: Vec<String> = ["ab", "cd", "ab"].iter().map(|s| s.to_string()).collect();
    let positives: [&[u8]; 6] = [
        b"[\"ab\"]",
        b"[\"ab cd\", \"cd ab\"]",
        b"[\"ab cd ab\"]",
        b"[\"ab\", \"ab\", \"ab\"]",
        // Runs reaching the last word admit one trailing space (tn is empty).
        b"[\"ab cd ab \"]",
        b"[\"cd ab \"]",
    ];
    let negatives: [&[u8]; 7] = [
        b"[]",
        b"[\"ab cd\"",
        b"[\"ba\"]",
        b"[\"ab  cd\"]",
        b"[\"ab\",\"cd\"]",
        b"\"ab\"",
        b"[\"ab cd \"]", // trailing space on a non-final run
    ];
    let grammar = build_highlight_grammar(&tokenize_words("ab cd ab").unwrap()).unwrap();
    for candidate in positives {
        assert!(oracle_accepts(&words, candidate));
        assert!(accepts_string(&grammar, candidate).unwrap());
    }
    for candidate in negatives {
        assert!(!oracle_accepts(&words, candidate));
        assert!(!accepts_string(&grammar, candidate).unwrap());
    }
}

#[test]
fn some_continuation_always_exists_mid_string() {
    // Walk every prefix of every 1- and 2-item positive for small sources:
    // until the closing `]` is consumed some byte is always allowed, and
    // afterwards only end-of-input is.
    for source in ["a", "hi there", "one two three four"] {
        let src = tokenize_words(source).unwrap();
        let recognizer =
            Recognizer::compile(&build_highlight_grammar(&src).unwrap()).unwrap();
        let runs = rendered_runs(&src.words);
        let mut positives: Vec<Vec<u8>> = Vec::new();
        for first in &runs {
            let mut single = vec![b'['];
            single.extend_from_slice(first);
            single.push(b']');
            positives.push(single);
            for second in &runs {
                let mut double = vec![b'['];
                double.extend_from_slice(first);
                double.extend_from_slice(b", ");
                double.extend_from_slice(second);
                double.push(b']');
                positives.push(double);
            }
        }
        for positive in &positives {
            for cut in 0..=positive.len() {
                let state = recognizer
                    .advance_bytes(&recognizer.initial_state(), &positive[..cut])
                    .unwrap();
                assert!(!state.is_rejected());
                if cut < positive.len() {
                    assert!(
                        !recognizer.allowed_bytes(&state).is_empty(),
                        "dead state at prefix {:?}",
                        String::from_utf8_lossy(&positive[..cut])
                    );
                } else {
                    assert!(recognizer.allowed_bytes(&state).is_empty());
                    assert!(recognizer.accepts_end(&state));
                }
            }
        }
    }
}

#[test]
fn exhaustive_agreement_on_small_sources() {
    // Every list of up to 2 runs, plus mutated negatives, for a handful of
    // tricky sources (duplicates, punctuation, embedded quotes).
    let sources = [
        "a",
        "a a",
        "ab cd",
        "hi, there.",
        "one two three four",
        "sa\"d end. sa\"d",
    ];
    for source in sources {
        let src = tokenize_words(source).unwrap();
        let grammar = build_highlight_grammar(&src).unwrap();
        let recognizer = Recognizer::compile(&grammar).unwrap();
        let runs = rendered_runs(&src.words);

        let mut candidates: Vec<Vec<u8>> = Vec::new();
        for first in &runs {
            let mut single = vec![b'['];
            single.extend_from_slice(first);
            single.push(b']');
            candidates.push(single);
            for second in &runs {
                let mut double = vec![b'['];
                double.extend_from_slice(first);
                double.extend_from_slice(b", ");
                double.extend_from_slice(second);
                double.push(b']');
                candidates.push(double);
            }
        }
        // Deterministic mutations of each candidate.
        let originals = candidates.clone();
        for (i, original) in originals.iter().enumerate() {
            let mut truncated = original.clone();
            truncated.pop();
            candidates.push(truncated);
            let mut no_bracket = original.clone();
            no_bracket.remove(0);
            candidates.push(no_bracket);
            let mut mangled = original.clone();
            let at = i % mangled.len();
            mangled[at] = b'#';
            candidates.push(mangled);
        }

        for candidate in &candidates {
            let expected = oracle_accepts(&src.words, candidate);
            let state = recognizer
                .advance_bytes(&recognizer.initial_state(), candidate);
            let actual = match state {
                Ok(s) if !s.is_rejected() => recognizer.accepts_end(&s),
                _ => false,
            };
            assert_eq!(
                actual,
                expected,
                "disagreement on {:?} for source {:?}",
                String::from_utf8_lossy(candidate),
                source
            );
        }
    }
}
