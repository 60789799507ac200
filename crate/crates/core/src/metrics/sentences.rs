//! Sentence splitting for summary evaluation: terminal punctuation followed
//! by whitespace, with an abbreviation guard list.

/// Recorded in run manifests; bump when the rules change.
pub const SENTENCE_SPLITTER_VERSION: &str = "sentsplit-v1";

const ABBREVIATIONS: &[&str] = &[
    "mr.", "mrs.", "ms.", "dr.", "prof.", "st.", "vs.", "e.g.", "i.e.", "etc.", "approx.",
];

fn is_abbreviation(text: &str) -> bool {
    let last_word = text
        .rsplit(char::is_whitespace)
        .next()
        .unwrap_or("")
        .to_lowercase();
    ABBREVIATIONS.contains(&last_word.as_str())
}

/// Split on `.`, `?`, or `!` followed by whitespace (or end of text), keeping
/// the punctuation with its sentence. Trailing runs of terminal punctuation
/// (`?!`) stay together; abbreviations like `e.g.` do not split.
pub fn split_sentences(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut sentences = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;
    while i < chars.len() {
        if matches!(chars[i], '.' | '?' | '!') {
            // Extend through a run like "?!".
            let mut end = i;
            while end + 1 < chars.len() && matches!(chars[end + 1], '.' | '?' | '!') {
                end += 1;
            }
            let at_boundary = end + 1 >= chars.len() || chars[end + 1].is_whitespace();
            let current: String = chars[start..=end].iter().collect();
            if at_boundary && !(chars[end] == '.' && is_abbreviation(current.trim_end())) {
                let sentence = current.trim().to_string();
                if !sentence.is_empty() {
                    sentences.push(sentence);
                }
                start = end + 1;
            }
            i = end + 1;
        } else {
            i += 1;
        }
    }
    let tail: String = chars[start.min(chars.len())..].iter().collect();
    let tail = tail.trim();
    if !tail.is_empty() {
        sentences.push(tail.to_string());
    }
    sentences
}
