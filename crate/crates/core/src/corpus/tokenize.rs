use std::ops::Range;

use serde::{Deserialize, Serialize};

/// A token with character (Unicode scalar) offsets into its source text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

/// Splits text into maximal alphanumeric runs and single-character
/// punctuation tokens. Whitespace separates tokens and is never part of one.
pub fn tokenize(text: &str) -> Vec<Token> {
    tokenize_with_bytes(text).into_iter().map(|(t, _)| t).collect()
}

/// Tokenizes and also returns each token's byte range.
pub(crate) fn tokenize_with_bytes(text: &str) -> Vec<(Token, Range<usize>)> {
    let mut out = Vec::new();
    // (char start, byte start) of the alphanumeric run in progress
    let mut run: Option<(usize, usize)> = None;
    let mut char_idx = 0;

    let close_run = |run: &mut Option<(usize, usize)>, char_end: usize, byte_end: usize, out: &mut Vec<_>| {
        if let Some((cs, bs)) = run.take() {
            out.push((
                Token {
                    text: text[bs..byte_end].to_string(),
                    start: cs,
                    end: char_end,
                },
                bs..byte_end,
            ));
        }
    };

    for (byte_idx, ch) in text.char_indices() {
        if ch.is_alphanumeric() {
            if run.is_none() {
                run = Some((char_idx, byte_idx));
            }
        } else {
            close_run(&mut run, char_idx, byte_idx, &mut out);
            if !ch.is_whitespace() {
                let byte_end = byte_idx + ch.len_utf8();
                out.push((
                    Token {
                        text: ch.to_string(),
                        start: char_idx,
                        end: char_idx + 1,
                    },
                    byte_idx..byte_end,
                ));
            }
        }
        char_idx += 1;
    }
    close_run(&mut run, char_idx, text.len(), &mut out);
    out
}

/// Byte offset of every char boundary, indexed by char offset (length n+1).
pub(crate) fn char_to_byte_table(text: &str) -> Vec<usize> {
    let mut table: Vec<usize> = text.char_indices().map(|(b, _)| b).collect();
    table.push(text.len());
    table
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn texts(tokens: &[Token]) -> Vec<&str> {
        tokens.iter().map(|t| t.text.as_str()).collect()
    }

    #[test]
    fn words_and_trailing_period() {
        assert_eq!(texts(&tokenize("head ache.")), ["head", "ache", "."]);
    }

    #[test]
    fn hyphen_splits_alnum_runs() {
        assert_eq!(texts(&tokenize("x2-3 days")), ["x2", "-", "3", "days"]);
    }

    #[test]
    fn empty_text() {
        assert!(tokenize("").is_empty());
        assert!(tokenize(" \n\t ").is_empty());
    }

    #[test]
    fn offsets_are_char_based() {
        let toks = tokenize("café, ok");
        assert_eq!(texts(&toks), ["café", ",", "ok"]);
        assert_eq!((toks[0].start, toks[0].end), (0, 4));
        assert_eq!((toks[1].start, toks[1].end), (4, 5));
        assert_eq!((toks[2].start, toks[2].end), (6, 8));
    }

    #[test]
    fn repeated_punctuation_is_split() {
        assert_eq!(texts(&tokenize("BP 120/80!!")), ["BP", "120", "/", "80", "!", "!"]);
    }

    proptest! {
        #[test]
        fn offsets_reconstruct_source(text in "\\PC{0,60}") {
            let chars: Vec<char> = text.chars().collect();
            let mut prev_end = 0;
            for tok in tokenize(&text) {
                prop_assert!(tok.start < tok.end);
                prop_assert!(tok.start >= prev_end);
                let slice: String = chars[tok.start..tok.end].iter().collect();
                prop_assert_eq!(&slice, &tok.text);
                prop_assert!(!tok.text.chars().any(char::is_whitespace));
                // skipped characters are whitespace only
                prop_assert!(chars[prev_end..tok.start].iter().all(|c| c.is_whitespace()));
                prev_end = tok.end;
            }
            prop_assert!(chars[prev_end..].iter().all(|c| c.is_whitespace()));
        }
    }
}
