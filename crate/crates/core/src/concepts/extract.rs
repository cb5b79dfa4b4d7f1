use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{normalize, subsumption_filter, Gazetteer};
use crate::corpus::{char_to_byte_table, tokenize_with_bytes};

/// A gazetteer match, with character offsets into the source text.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ConceptSpan {
    pub cui: String,
    pub start: usize,
    pub end: usize,
    pub n_tokens: usize,
}

impl ConceptSpan {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    /// Whether `other`'s interval lies within this one (equality included).
    pub fn contains(&self, other: &ConceptSpan) -> bool {
        self.start <= other.start && other.end <= self.end
    }
}

/// Every token n-gram (up to the longest phrase) whose normalized text is a
/// gazetteer key, sorted by start, then longest first, then CUI.
pub fn extract_concepts(text: &str, gaz: &Gazetteer) -> Vec<ConceptSpan> {
    let toks = tokenize_with_bytes(text);
    let max_n = gaz.max_phrase_len();
    let mut spans = Vec::new();

    for i in 0..toks.len() {
        let byte_start = toks[i].1.start;
        for j in i..toks.len().min(i + max_n) {
            let key = normalize(&text[byte_start..toks[j].1.end]);
            if !gaz.is_prefix(&key) {
                break;
            }
            if let Some(cuis) = gaz.get(&key) {
                for cui in cuis {
                    spans.push(ConceptSpan {
                        cui: cui.clone(),
                        start: toks[i].0.start,
                        end: toks[j].0.end,
                        n_tokens: j - i + 1,
                    });
                }
            }
        }
    }
    spans.sort_by(|a, b| {
        a.start
            .cmp(&b.start)
            .then(b.len().cmp(&a.len()))
            .then_with(|| a.cui.cmp(&b.cui))
    });
    spans
}

/// Distinct CUIs left after subsumption filtering.
pub fn cui_set(text: &str, gaz: &Gazetteer) -> BTreeSet<String> {
    subsumption_filter(&extract_concepts(text, gaz))
        .into_iter()
        .map(|s| s.cui)
        .collect()
}

/// Slice of `text` between two character offsets.
pub fn char_slice(text: &str, start: usize, end: usize) -> &str {
    let table = char_to_byte_table(text);
    &text[table[start]..table[end]]
}
