//! Strict parser for the grammar's own bracketed-list syntax, with salvage
//! for decodes that ran out of tokens mid-list.
//!
//! EOS-terminated constrained decodes always parse cleanly (grammar-safety
//! invariant). A length-stopped decode is truncated to its last complete
//! quoted item and flagged.

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedList {
    pub items: Vec<String>,
    pub truncated: bool,
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum ListParseError {
    #[error("malformed highlight list at byte {offset}: {message}")]
    Malformed { offset: usize, message: String },
}

/// Parse `["item", "item", ...]`, unescaping `\"` and `\\` inside items.
///
/// Inputs that stop early (no closing `]`, or mid-item) yield the complete
/// items seen so far with `truncated: true`. Bytes that could not have come
/// from the list grammar at all are an error.
pub fn parse_highlight_list(bytes: &[u8]) -> Result<ParsedList, ListParseError> {
    let mut items = Vec::new();
    let mut pos = 0usize;

    if bytes.is_empty() {
        return Ok(ParsedList {
            items,
            truncated: true,
        });
    }
    if bytes[0] != b'[' {
        return Err(ListParseError::Malformed {
            offset: 0,
            message: "expected `[`".into(),
        });
    }
    pos += 1;

    loop {
        // Expect an opening quote (or nothing: truncated right here).
        match bytes.get(pos) {
            None => {
                return Ok(ParsedList {
                    items,
                    truncated: true,
                })
            }
            Some(b'"') => pos += 1,
            Some(other) => {
                return Err(ListParseError::Malformed {
                    offset: pos,
                    message: format!("expected `\"`, found `{}`", *other as char),
                })
            }
        }
        // Item body until the closing quote.
        let mut item = Vec::new();
        let closed = loop {
            match bytes.get(pos) {
                None => break false,
                Some(b'"') => {
                    pos += 1;
                    break true;
                }
                Some(b'\\') => match bytes.get(pos + 1) {
                    Some(b'"') => {
                        item.push(b'"');
                        pos += 2;
                    }
                    Some(b'\\') => {
                        item.push(b'\\');
                        pos += 2;
                    }
                    _ => {
                        // A lone backslash is just a byte of the item.
                        item.push(b'\\');
                        pos += 1;
                    }
                },
                Some(&byte) => {
                    item.push(byte);
                    pos += 1;
                }
            }
        };
        if !closed {
            // Mid-item cut: drop the partial item.
            return Ok(ParsedList {
                items,
                truncated: true,
            });
        }
        items.push(String::from_utf8_lossy(&item).into_owned());

        // After an item: `]`, `, `, or a truncated tail.
        match bytes.get(pos) {
            None => {
                return Ok(ParsedList {
                    items,
                    truncated: true,
                })
            }
            Some(b']') => {
                pos += 1;
                if pos != bytes.len() {
                    return Err(ListParseError::Malformed {
                        offset: pos,
                        message: "trailing bytes after `]`".into(),
                    });
                }
                return Ok(ParsedList {
                    items,
                    truncated: false,
                });
            }
            Some(b',') => {
                pos += 1;
                match bytes.get(pos) {
                    None => {
                        return Ok(ParsedList {
                            items,
                            truncated: true,
                        })
                    }
                    Some(b' ') => pos += 1,
                    Some(other) => {
                        return Err(ListParseError::Malformed {
                            offset: pos,
                            message: format!("expected space after `,`, found `{}`", *other as char),
                        })
                    }
                }
            }
            Some(other) => {
                return Err(ListParseError::Malformed {
                    offset: pos,
                    message: format!("expected `,` or `]`, found `{}`", *other as char),
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_complete_lists() {
        let parsed = parse_highlight_list(b"[\"a b\", \"c\"]").unwrap();
        assert_eq!(parsed.items, vec!["a b", "c"]);
        assert!(!parsed.truncated);
    }

    #[test]
    fn unescapes_quotes_and_backslashes() {
        let parsed = parse_highlight_list(br#"["say \"hi\"", "back\\slash"]"#).unwrap();
        assert_eq!(parsed.items, vec![r#"say "hi""#, r"back\slash"]);
    }

    #[test]
    fn salvages_truncated_lists() {
        for (input, expected) in [
            (&b"[\"a\", \"b"[..], vec!["a"]),
            (b"[\"a\"", vec!["a"]),
            (b"[\"a\",", vec!["a"]),
            (b"[\"a\", ", vec!["a"]),
            (b"[\"", vec![]),
            (b"[", vec![]),
            (b"", vec![]),
        ] {
            let parsed = parse_highlight_list(input).unwrap();
            assert_eq!(parsed.items, expected, "input {input:?}");
            assert!(parsed.truncated, "input {input:?}");
        }
    }

    #[test]
    fn rejects_non_list_bytes() {
        assert!(parse_highlight_list(b"nope").is_err());
        assert!(parse_highlight_list(b"[\"a\"]x").is_err());
        assert!(parse_highlight_list(b"[x]").is_err());
    }
}
