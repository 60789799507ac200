//! The GBNF subset: parsing, serialization, and construction of the
//! highlight-extraction grammar from arbitrary source text.
//!
//! The dialect is the slice of llama.cpp's GBNF needed by the positional
//! word-run construction: one `name ::= body` rule per line, double-quoted
//! literals with `\"` and `\\` escapes, `|` alternation, parenthesized groups,
//! and `?` / `*` repetition markers. Character classes and `+` are rejected
//! with an unsupported-construct error.

use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

/// A sequence of elements; one branch of an alternation.
pub type Alternate = Vec<Element>;

/// Repetition marker attached to a group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Repetition {
    Once,
    Optional,
    ZeroOrMore,
}

impl Repetition {
    fn suffix(self) -> &'static str {
        match self {
            Repetition::Once => "",
            Repetition::Optional => "?",
            Repetition::ZeroOrMore => "*",
        }
    }
}

/// One element of a rule alternate.
///
/// Literals are stored unescaped; escaping happens only at serialization.
/// A group carries its own alternation so `("a" | b)?` round-trips.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Element {
    Literal(String),
    RuleRef(String),
    Group {
        alternates: Vec<Alternate>,
        repetition: Repetition,
    },
}

/// A parsed grammar: named rules in definition order plus a root rule.
///
/// Iteration order equals definition order, which the serializer relies on
/// for bit-exact output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Grammar {
    rules: IndexMap<String, Vec<Alternate>>,
    root: String,
}

impl PartialEq for Grammar {
    fn eq(&self, other: &Self) -> bool {
        // IndexMap equality ignores order; structural identity must not.
        self.root == other.root
            && self.rules.len() == other.rules.len()
            && self.rules.iter().zip(other.rules.iter()).all(|(a, b)| a == b)
    }
}

impl Eq for Grammar {}

impl Grammar {
    /// Build a grammar from `(name, alternates)` pairs in definition order.
    pub fn from_rules(
        rules: Vec<(String, Vec<Alternate>)>,
        root: impl Into<String>,
    ) -> Result<Self, GrammarError> {
        let root = root.into();
        let mut map = IndexMap::with_capacity(rules.len());
        for (name, alts) in rules {
            if map.insert(name.clone(), alts).is_some() {
                return Err(GrammarError::DuplicateRule { name });
            }
        }
        let grammar = Grammar { rules: map, root };
        grammar.validate()?;
        Ok(grammar)
    }

    pub fn root_rule(&self) -> &str {
        &self.root
    }

    pub fn rule_count(&self) -> usize {
        self.rules.len()
    }

    /// Rules in definition order.
    pub fn rules(&self) -> impl Iterator<Item = (&str, &[Alternate])> {
        self.rules.iter().map(|(n, a)| (n.as_str(), a.as_slice()))
    }

    pub fn alternates(&self, rule: &str) -> Option<&[Alternate]> {
        self.rules.get(rule).map(|a| a.as_slice())
    }

    fn validate(&self) -> Result<(), GrammarError> {
        if !self.rules.contains_key(&self.root) {
            return Err(GrammarError::MissingRoot {
                name: self.root.clone(),
            });
        }
        for alts in self.rules.values() {
            for alt in alts {
                self.check_alternate(alt)?;
            }
        }
        Ok(())
    }

    fn check_alternate(&self, alt: &Alternate) -> Result<(), GrammarError> {
        for element in alt {
            match element {
                Element::Literal(_) => {}
                Element::RuleRef(name) => {
                    if !self.rules.contains_key(name) {
                        return Err(GrammarError::UndefinedRule { name: name.clone() });
                    }
                }
                Element::Group { alternates, .. } => {
                    for inner in alternates {
                        self.check_alternate(inner)?;
                    }
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for Grammar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&serialize_gbnf(self))
    }
}

/// Whitespace word tokenization of a source text.
///
/// Words are maximal runs of non-whitespace; punctuation stays attached.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceTokenization {
    pub words: Vec<String>,
    pub original_text: String,
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum GrammarError {
    #[error("syntax error at line {line}, column {col}: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("unsupported construct at line {line}, column {col}: {construct} is outside the supported GBNF subset")]
    UnsupportedConstruct {
        line: usize,
        col: usize,
        construct: String,
    },
    #[error("reference to undefined rule `{name}`")]
    UndefinedRule { name: String },
    #[error("duplicate rule name `{name}`")]
    DuplicateRule { name: String },
    #[error("no rule named `{name}` to use as root")]
    MissingRoot { name: String },
    #[error("empty source: no words to build a grammar from")]
    EmptySource,
}

// ---------------------------------------------------------------------------
// Parsing

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
    line: usize,
    line_start: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Parser {
            bytes: text.as_bytes(),
            pos: 0,
            line: 1,
            line_start: 0,
        }
    }

    fn col(&self) -> usize {
        self.pos - self.line_start + 1
    }

    fn syntax<T>(&self, message: impl Into<String>) -> Result<T, GrammarError> {
        Err(GrammarError::Syntax {
            line: self.line,
            col: self.col(),
            message: message.into(),
        })
    }

    fn unsupported<T>(&self, construct: impl Into<String>) -> Result<T, GrammarError> {
        Err(GrammarError::UnsupportedConstruct {
            line: self.line,
            col: self.col(),
            construct: construct.into(),
        })
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let b = self.peek()?;
        self.pos += 1;
        if b == b'\n' {
            self.line += 1;
            self.line_start = self.pos;
        }
        Some(b)
    }

    /// Skip spaces and tabs within a line.
    fn skip_inline_ws(&mut self) {
        while matches!(self.peek(), Some(b' ') | Some(b'\t') | Some(b'\r')) {
            self.pos += 1;
        }
    }

    fn skip_blank_lines(&mut self) {
        loop {
            self.skip_inline_ws();
            if self.peek() == Some(b'\n') {
                self.bump();
            } else {
                break;
            }
        }
    }

    fn parse_grammar(&mut self) -> Result<Grammar, GrammarError> {
        let mut rules: IndexMap<String, Vec<Alternate>> = IndexMap::new();
        loop {
            self.skip_blank_lines();
            if self.peek().is_none() {
                break;
            }
            let (name, alts) = self.parse_rule()?;
            if rules.contains_key(&name) {
                return Err(GrammarError::DuplicateRule { name });
            }
            rules.insert(name, alts);
        }
        if rules.is_empty() {
            return self.syntax("expected at least one rule");
        }
        if !rules.contains_key("root") {
            return Err(GrammarError::MissingRoot {
                name: "root".into(),
            });
        }
        let grammar = Grammar {
            rules,
            root: "root".into(),
        };
        grammar.validate()?;
        Ok(grammar)
    }

    fn parse_rule(&mut self) -> Result<(String, Vec<Alternate>), GrammarError> {
        let name = self.parse_rule_name()?;
        self.skip_inline_ws();
        if !self.bytes[self.pos..].starts_with(b"::=") {
            return self.syntax(format!("expected `::=` after rule name `{name}`"));
        }
        self.pos += 3;
        self.skip_inline_ws();
        let alts = self.parse_alternation(false)?;
        // Rule is newline-terminated (or ends the input).
        match self.peek() {
            None => {}
            Some(b'\n') => {
                self.bump();
            }
            Some(other) => {
                return self.syntax(format!(
                    "expected end of line after rule body, found `{}`",
                    other as char
                ))
            }
        }
        Ok((name, alts))
    }

    fn parse_rule_name(&mut self) -> Result<String, GrammarError> {
        let start = self.pos;
        match self.peek() {
            Some(b) if b.is_ascii_alphabetic() || b == b'_' => {
                self.pos += 1;
            }
            Some(b) => {
                return self.syntax(format!(
                    "expected rule name, found `{}`",
                    b as char
                ))
            }
            None => return self.syntax("expected rule name, found end of input"),
        }
        while matches!(self.peek(), Some(b) if b.is_ascii_alphanumeric() || b == b'_' || b == b'-')
        {
            self.pos += 1;
        }
        Ok(String::from_utf8(self.bytes[start..self.pos].to_vec()).expect("ascii rule name"))
    }

    /// Parse `alt ( "|" alt )*` until end of line, end of input, or `)` when
    /// `in_group` is set.
    fn parse_alternation(&mut self, in_group: bool) -> Result<Vec<Alternate>, GrammarError> {
        let mut alts = vec![self.parse_sequence(in_group)?];
        loop {
            self.skip_inline_ws();
            if self.peek() == Some(b'|') {
                self.bump();
                self.skip_inline_ws();
                alts.push(self.parse_sequence(in_group)?);
            } else {
                break;
            }
        }
        Ok(alts)
    }

    fn parse_sequence(&mut self, in_group: bool) -> Result<Alternate, GrammarError> {
        let mut elements = Vec::new();
        loop {
            self.skip_inline_ws();
            match self.peek() {
                None | Some(b'\n') | Some(b'|') => break,
                Some(b')') if in_group => break,
                Some(b')') => return self.syntax("unmatched `)`"),
                _ => {}
            }
            elements.push(self.parse_element()?);
        }
        if elements.is_empty() {
            return self.syntax("expected an element (literal, rule reference, or group)");
        }
        Ok(elements)
    }

    fn parse_element(&mut self) -> Result<Element, GrammarError> {
        let element = match self.peek() {
            Some(b'"') => Element::Literal(self.parse_literal()?),
            Some(b'(') => {
                self.bump();
                self.skip_inline_ws();
                let alternates = self.parse_alternation(true)?;
                self.skip_inline_ws();
                if self.peek() != Some(b')') {
                    return self.syntax("expected `)` to close group");
                }
                self.bump();
                return Ok(Element::Group {
                    alternates,
                    repetition: self.parse_repetition()?,
                });
            }
            Some(b'[') => return self.unsupported("character class `[...]`"),
            Some(b'{') => return self.unsupported("bounded repetition `{...}`"),
            Some(b'#') => return self.unsupported("comment `#`"),
            Some(b) if b.is_ascii_alphabetic() || b == b'_' => {
                Element::RuleRef(self.parse_rule_name()?)
            }
            Some(b) => {
                return self.syntax(format!(
                    "expected element (literal, rule reference, or group), found `{}`",
                    b as char
                ))
            }
            None => return self.syntax("expected element, found end of input"),
        };
        // A marker on a bare literal/reference wraps it in a single-element group.
        match self.parse_repetition()? {
            Repetition::Once => Ok(element),
            marker => Ok(Element::Group {
                alternates: vec![vec![element]],
                repetition: marker,
            }),
        }
    }

    fn parse_repetition(&mut self) -> Result<Repetition, GrammarError> {
        match self.peek() {
            Some(b'?') => {
                self.bump();
                Ok(Repetition::Optional)
            }
            Some(b'*') => {
                self.bump();
                Ok(Repetition::ZeroOrMore)
            }
            Some(b'+') => self.unsupported("`+` repetition"),
            _ => Ok(Repetition::Once),
        }
    }

    fn parse_literal(&mut self) -> Result<String, GrammarError> {
        debug_assert_eq!(self.peek(), Some(b'"'));
        self.bump();
        let mut out = Vec::new();
        loop {
            match self.peek() {
                None | Some(b'\n') => return self.syntax("unterminated string literal"),
                Some(b'"') => {
                    self.bump();
                    break;
                }
                Some(b'\\') => {
                    self.bump();
                    match self.peek() {
                        Some(b'"') => out.push(b'"'),
                        Some(b'\\') => out.push(b'\\'),
                        Some(other) => {
                            return self.syntax(format!(
                                "unsupported escape `\\{}` (only \\\" and \\\\ are supported)",
                                other as char
                            ))
                        }
                        None => return self.syntax("unterminated escape"),
                    }
                    self.bump();
                }
                Some(_) => {
                    out.push(self.bump().expect("peeked"));
                }
            }
        }
        Ok(String::from_utf8(out).expect("literal bytes come from valid UTF-8 input"))
    }
}

/// Parse GBNF-subset text into a [`Grammar`].
///
/// The root is the rule named `root`. Serializing the result re-parses to an
/// identical structure.
pub fn parse_gbnf(text: &str) -> Result<Grammar, GrammarError> {
    Parser::new(text).parse_grammar()
}

// ---------------------------------------------------------------------------
// Serialization

fn escape_literal(raw: &str, out: &mut String) {
    out.push('"');
    for ch in raw.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            other => out.push(other),
        }
    }
    out.push('"');
}

fn write_alternates(alts: &[Alternate], out: &mut String) {
    for (i, alt) in alts.iter().enumerate() {
        if i > 0 {
            out.push_str(" | ");
        }
        for (j, element) in alt.iter().enumerate() {
            if j > 0 {
                out.push(' ');
            }
            write_element(element, out);
        }
    }
}

fn write_element(element: &Element, out: &mut String) {
    match element {
        Element::Literal(raw) => escape_literal(raw, out),
        Element::RuleRef(name) => out.push_str(name),
        Element::Group {
            alternates,
            repetition,
        } => {
            out.push('(');
            write_alternates(alternates, out);
            out.push(')');
            out.push_str(repetition.suffix());
        }
    }
}

/// Serialize a grammar as GBNF-subset text, one rule per line, LF endings,
/// trailing newline. `parse_gbnf(serialize_gbnf(g))` is structurally equal
/// to `g`.
pub fn serialize_gbnf(grammar: &Grammar) -> String {
    let mut out = String::new();
    for (name, alts) in grammar.rules() {
        out.push_str(name);
        out.push_str(" ::= ");
        write_alternates(alts, &mut out);
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------------------
// Highlight grammar construction

/// Split source text into whitespace-delimited words.
///
/// Words are maximal runs of non-whitespace bytes in original order;
/// punctuation stays attached to its word.
pub fn tokenize_words(text: &str) -> Result<SourceTokenization, GrammarError> {
    let words: Vec<String> = text.split_whitespace().map(str::to_owned).collect();
    if words.is_empty() {
        return Err(GrammarError::EmptySource);
    }
    Ok(SourceTokenization {
        words,
        original_text: text.to_owned(),
    })
}

/// Build the highlight-extraction grammar for a tokenized source.
///
/// The accepted language is a bracketed, comma-space-separated list of one or
/// more double-quoted strings, where each quoted string is a contiguous run
/// of source words joined by single spaces. With `n` words the grammar has
/// `n + 3` rules: `root`, `h`, and `t0..=tn`.
pub fn build_highlight_grammar(src: &SourceTokenization) -> Result<Grammar, GrammarError> {
    let n = src.words.len();
    if n == 0 {
        return Err(GrammarError::EmptySource);
    }
    let mut rules: Vec<(String, Vec<Alternate>)> = Vec::with_capacity(n + 3);

    rules.push((
        "root".into(),
        vec![vec![
            Element::Literal("[".into()),
            Element::RuleRef("h".into()),
            Element::Group {
                alternates: vec![vec![
                    Element::Literal(", ".into()),
                    Element::RuleRef("h".into()),
                ]],
                repetition: Repetition::ZeroOrMore,
            },
            Element::Literal("]".into()),
        ]],
    ));

    rules.push((
        "h".into(),
        vec![vec![
            Element::Literal("\"".into()),
            Element::Group {
                alternates: (0..n).map(|i| vec![Element::RuleRef(format!("t{i}"))]).collect(),
                repetition: Repetition::Once,
            },
            Element::Literal("\"".into()),
        ]],
    ));

    for (i, word) in src.words.iter().enumerate() {
        rules.push((
            format!("t{i}"),
            vec![vec![
                Element::Literal(word.clone()),
                Element::Group {
                    alternates: vec![vec![
                        Element::Literal(" ".into()),
                        Element::RuleRef(format!("t{}", i + 1)),
                    ]],
                    repetition: Repetition::Optional,
                },
            ]],
        ));
    }
    rules.push((format!("t{n}"), vec![vec![Element::Literal(String::new())]]));

    Grammar::from_rules(rules, "root")
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE_SENTENCE: &str = "Recently, I attempted suicide by consuming an unspecified \
                                     amount of prescription medications.";

    #[test]
    fn parse_two_rule_grammar_with_star_group() {
        let text = "root ::= \"[\" h (\", \" h)* \"]\"\nh ::= \"\\\"\" \"x\" \"\\\"\"\n";
        let g = parse_gbnf(text).unwrap();
        assert_eq!(g.rule_count(), 2);
        let root = &g.alternates("root").unwrap()[0];
        assert!(matches!(
            root[2],
            Element::Group {
                repetition: Repetition::ZeroOrMore,
                ..
            }
        ));
        assert_eq!(root[0], Element::Literal("[".into()));
    }

    #[test]
    fn parse_empty_literal_rule() {
        let g = parse_gbnf("root ::= \"\"\n").unwrap();
        assert_eq!(
            g.alternates("root").unwrap(),
            &[vec![Element::Literal(String::new())]]
        );
    }

    #[test]
    fn undefined_reference_is_named() {
        let err = parse_gbnf("root ::= undefined_rule\n").unwrap_err();
        assert_eq!(
            err,
            GrammarError::UndefinedRule {
                name: "undefined_rule".into()
            }
        );
    }

    #[test]
    fn duplicate_rule_rejected() {
        let err = parse_gbnf("root ::= \"a\"\nroot ::= \"b\"\n").unwrap_err();
        assert!(matches!(err, GrammarError::DuplicateRule { name } if name == "root"));
    }

    #[test]
    fn missing_root_rejected() {
        let err = parse_gbnf("start ::= \"a\"\n").unwrap_err();
        assert!(matches!(err, GrammarError::MissingRoot { .. }));
    }

    #[test]
    fn unsupported_constructs_are_called_out() {
        assert!(matches!(
            parse_gbnf("root ::= [a-z]\n").unwrap_err(),
            GrammarError::UnsupportedConstruct { .. }
        ));
        assert!(matches!(
            parse_gbnf("root ::= \"a\"+\n").unwrap_err(),
            GrammarError::UnsupportedConstruct { .. }
        ));
    }

    #[test]
    fn syntax_error_carries_position() {
        let err = parse_gbnf("root ::= \"a\nroot2 ::= \"b\"\n").unwrap_err();
        match err {
            GrammarError::Syntax { line, col, message } => {
                assert_eq!(line, 1);
                assert!(col > 9, "col = {col}");
                assert!(message.contains("unterminated"));
            }
            other => panic!("unexpected error: {other:?}"),
        }
    }

    #[test]
    fn serialize_single_literal_rule() {
        let g = Grammar::from_rules(
            vec![("root".into(), vec![vec![Element::Literal("a".into())]])],
            "root",
        )
        .unwrap();
        assert_eq!(serialize_gbnf(&g), "root ::= \"a\"\n");
    }

    #[test]
    fn serialize_escapes_quote_and_backslash() {
        let g = Grammar::from_rules(
            vec![("root".into(), vec![vec![Element::Literal("\"\\".into())]])],
            "root",
        )
        .unwrap();
        assert_eq!(serialize_gbnf(&g), "root ::= \"\\\"\\\\\"\n");
        assert_eq!(parse_gbnf(&serialize_gbnf(&g)).unwrap(), g);
    }

    #[test]
    fn tokenize_example_sentence() {
        let src = tokenize_words(EXAMPLE_SENTENCE).unwrap();
        assert_eq!(src.words.len(), 12);
        assert_eq!(src.words[0], "Recently,");
        assert_eq!(src.words[11], "medications.");
    }

    #[test]
    fn tokenize_single_word_and_collapse() {
        assert_eq!(tokenize_words("a").unwrap().words, vec!["a"]);
        assert_eq!(tokenize_words("a  b\t c").unwrap().words, vec!["a", "b", "c"]);
        assert_eq!(tokenize_words("  \t\n").unwrap_err(), GrammarError::EmptySource);
    }

    #[test]
    fn highlight_grammar_shape() {
        let src = tokenize_words(EXAMPLE_SENTENCE).unwrap();
        let g = build_highlight_grammar(&src).unwrap();
        assert_eq!(g.rule_count(), 15);
        let text = serialize_gbnf(&g);
        assert!(text.starts_with("root ::= \"[\" h (\", \" h)* \"]\"\n"));
        assert!(text.contains("\nt0 ::= \"Recently,\" (\" \" t1)?\n"));
        assert!(text.contains("\nt10 ::= \"prescription\" (\" \" t11)?\n"));
        assert!(text.ends_with("\nt12 ::= \"\"\n"));
    }

    #[test]
    fn highlight_grammar_round_trips() {
        let src = tokenize_words("one two three").unwrap();
        let g = build_highlight_grammar(&src).unwrap();
        let reparsed = parse_gbnf(&serialize_gbnf(&g)).unwrap();
        assert_eq!(reparsed, g);
    }

    #[test]
    fn quote_bearing_word_round_trips() {
        let src = tokenize_words(r#"say "hi" back\slash"#).unwrap();
        let g = build_highlight_grammar(&src).unwrap();
        let reparsed = parse_gbnf(&serialize_gbnf(&g)).unwrap();
        assert_eq!(reparsed, g);
    }
}
