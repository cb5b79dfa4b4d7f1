use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use crate::corpus::tokenize_with_bytes;
use crate::{Error, Result};

/// Lowercases and collapses whitespace runs to single spaces; trims the ends.
pub fn normalize(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for word in s.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.extend(word.chars().flat_map(char::to_lowercase));
    }
    out
}

/// Normalized surface phrase to concept identifiers.
#[derive(Debug, Clone, Default)]
pub struct Gazetteer {
    entries: BTreeMap<String, Vec<String>>,
    // normalized forms of every token-prefix of every phrase
    prefixes: HashSet<String>,
    max_phrase_len: usize,
}

impl Gazetteer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self> {
        let mut gaz = Self::new();
        for (i, (phrase, cui)) in pairs.into_iter().enumerate() {
            gaz.insert(phrase, cui).map_err(|reason| Error::Gazetteer {
                line: i + 1,
                reason,
            })?;
        }
        Ok(gaz)
    }

    /// Adds a phrase. A phrase may map to several CUIs.
    pub fn insert(&mut self, phrase: &str, cui: &str) -> std::result::Result<(), String> {
        let cui = cui.trim();
        if cui.is_empty() {
            return Err("empty CUI".into());
        }
        let key = normalize(phrase);
        let toks = tokenize_with_bytes(&key);
        if toks.is_empty() {
            return Err(format!("phrase {phrase:?} has no tokens"));
        }
        for (_, bytes) in &toks {
            self.prefixes.insert(key[..bytes.end].to_string());
        }
        self.max_phrase_len = self.max_phrase_len.max(toks.len());
        let cuis = self.entries.entry(key).or_default();
        if let Err(pos) = cuis.binary_search_by(|c| c.as_str().cmp(cui)) {
            cuis.insert(pos, cui.to_string());
        }
        Ok(())
    }

    /// Parses `phrase<TAB>CUI` lines. Blank lines and `#` comments are skipped.
    pub fn parse_tsv(text: &str) -> Result<Self> {
        let mut gaz = Self::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (phrase, cui) = line.split_once('\t').ok_or_else(|| Error::Gazetteer {
                line: i + 1,
                reason: "expected phrase<TAB>CUI".into(),
            })?;
            gaz.insert(phrase, cui).map_err(|reason| Error::Gazetteer {
                line: i + 1,
                reason,
            })?;
        }
        Ok(gaz)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_tsv(&text)
    }

    pub fn get(&self, normalized: &str) -> Option<&[String]> {
        self.entries.get(normalized).map(Vec::as_slice)
    }

    pub(crate) fn is_prefix(&self, normalized: &str) -> bool {
        self.prefixes.contains(normalized)
    }

    /// Token count of the longest phrase.
    pub fn max_phrase_len(&self) -> usize {
        self.max_phrase_len
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[String])> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization() {
        assert_eq!(normalize("  Head \t\n ACHE "), "head ache");
        assert_eq!(normalize(""), "");
    }

    #[test]
    fn tsv_parsing_and_max_len() {
        let gaz = Gazetteer::parse_tsv(
            "# sample\nhead\tC1\nache\tC2\nHead  Ache\tC3\nshortness of breath\tC4\nhead\tC0\n",
        )
        .unwrap();
        assert_eq!(gaz.len(), 4);
        assert_eq!(gaz.max_phrase_len(), 3);
        assert_eq!(gaz.get("head ache").unwrap(), ["C3"]);
        assert_eq!(gaz.get("head").unwrap(), ["C0", "C1"]);
        assert!(gaz.is_prefix("shortness of"));
        assert!(!gaz.is_prefix("of breath"));
    }

    #[test]
    fn malformed_lines_report_line_numbers() {
        let err = Gazetteer::parse_tsv("head\tC1\nno tab here\n").unwrap_err();
        assert!(matches!(err, Error::Gazetteer { line: 2, .. }));
        let err = Gazetteer::parse_tsv("   \tC1\n").unwrap_err();
        assert!(matches!(err, Error::Gazetteer { line: 1, .. }));
    }
}
