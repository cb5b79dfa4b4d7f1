//! Note ingestion, section splitting, tokenization, annotations and splits.

mod annotation;
mod labels;
mod sections;
mod split;
mod tokenize;

use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use annotation::{
    label_tokens, load_annotated, load_annotated_dir, parse_annotations, read_spans, write_spans,
    AnnotatedSpan,
};
pub use labels::{Label, NUM_LABELS};
pub use sections::{
    split_sections, HeaderPattern, HeaderSet, Section, SectionedSummary, DEFAULT_HEADERS,
    UNKNOWN_SECTION,
};
pub use split::{split_dataset, split_sizes, DatasetSplit};
pub use tokenize::{tokenize, Token};
pub(crate) use tokenize::{char_to_byte_table, tokenize_with_bytes};

/// One clinical note.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoteRecord {
    /// Row identifier; defaults to the 0-based input row when not supplied.
    #[serde(default)]
    pub note_id: String,
    pub subject_id: String,
    #[serde(default, deserialize_with = "empty_as_none")]
    pub hadm_id: Option<String>,
    pub category: String,
    #[serde(default)]
    pub chart_time: String,
    pub text: String,
    /// Optional covariate carried through to recall reports.
    #[serde(default, deserialize_with = "parse_opt_f64")]
    pub hours_outside_icu: Option<f64>,
}

impl NoteRecord {
    pub fn new(subject_id: &str, hadm_id: Option<&str>, category: &str, text: &str) -> Self {
        NoteRecord {
            note_id: String::new(),
            subject_id: subject_id.to_string(),
            hadm_id: hadm_id.map(str::to_string),
            category: category.to_string(),
            chart_time: String::new(),
            text: text.to_string(),
            hours_outside_icu: None,
        }
    }

    pub fn with_id(mut self, note_id: impl Into<String>) -> Self {
        self.note_id = note_id.into();
        self
    }

    /// Discharge reports ("Discharge summary", "discharge", ...).
    pub fn is_discharge(&self) -> bool {
        self.category.trim().to_ascii_lowercase().starts_with("discharge")
    }

    fn validate(&self, row: usize) -> Result<()> {
        if self.subject_id.trim().is_empty() {
            return Err(Error::NoteInput(format!("row {row}: empty subject_id")));
        }
        if self.text.is_empty() {
            return Err(Error::NoteInput(format!("row {row}: empty text")));
        }
        Ok(())
    }
}

fn empty_as_none<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Option<String>, D::Error> {
    let v: Option<String> = Option::deserialize(d)?;
    Ok(v.filter(|s| !s.trim().is_empty()))
}

fn parse_opt_f64<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum NumOrStr {
        Num(f64),
        Str(String),
    }
    match Option::<NumOrStr>::deserialize(d)? {
        None => Ok(None),
        Some(NumOrStr::Num(x)) => Ok(Some(x)),
        Some(NumOrStr::Str(s)) if s.trim().is_empty() => Ok(None),
        Some(NumOrStr::Str(s)) => s.trim().parse().map(Some).map_err(serde::de::Error::custom),
    }
}

fn finish_notes(mut notes: Vec<NoteRecord>) -> Result<Vec<NoteRecord>> {
    for (i, n) in notes.iter_mut().enumerate() {
        n.validate(i)?;
        if n.note_id.is_empty() {
            n.note_id = i.to_string();
        }
    }
    Ok(notes)
}

/// Reads notes from CSV (header row required).
pub fn read_notes_csv<R: std::io::Read>(reader: R) -> Result<Vec<NoteRecord>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let notes = rdr
        .deserialize()
        .enumerate()
        .map(|(i, row)| row.map_err(|e| Error::NoteInput(format!("row {i}: {e}"))))
        .collect::<Result<Vec<NoteRecord>>>()?;
    finish_notes(notes)
}

/// Reads notes from JSON lines. Blank lines are skipped.
pub fn read_notes_jsonl<R: BufRead>(reader: R) -> Result<Vec<NoteRecord>> {
    let mut notes = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::NoteInput(format!("line {}: {e}", i + 1)))?;
        if line.trim().is_empty() {
            continue;
        }
        let note: NoteRecord = serde_json::from_str(&line)
            .map_err(|e| Error::NoteInput(format!("line {}: {e}", i + 1)))?;
        notes.push(note);
    }
    finish_notes(notes)
}

/// Reads notes, choosing the format from the extension (`.csv` or JSON lines).
pub fn read_notes(path: &Path) -> Result<Vec<NoteRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let is_csv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        read_notes_csv(file)
    } else {
        read_notes_jsonl(std::io::BufReader::new(file))
    }
}

/// A tokenized note with one topic label per token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDocument {
    pub doc_id: String,
    pub tokens: Vec<Token>,
    pub labels: Vec<Label>,
}

impl LabeledDocument {
    pub fn new(doc_id: &str, tokens: Vec<Token>, labels: Vec<Label>) -> Result<Self> {
        if tokens.len() != labels.len() {
            return Err(Error::LengthMismatch {
                scores: tokens.len(),
                labels: labels.len(),
            });
        }
        Ok(LabeledDocument {
            doc_id: doc_id.to_string(),
            tokens,
            labels,
        })
    }

    /// Builds a document from pre-split words joined by single spaces.
    pub fn from_words(doc_id: &str, words: &[(&str, Label)]) -> Self {
        let mut tokens = Vec::with_capacity(words.len());
        let mut pos = 0;
        for (w, _) in words {
            let len = w.chars().count();
            tokens.push(Token {
                text: w.to_string(),
                start: pos,
                end: pos + len,
            });
            pos += len + 1;
        }
        LabeledDocument {
            doc_id: doc_id.to_string(),
            tokens,
            labels: words.iter().map(|(_, l)| *l).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.text.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_notes_with_optional_fields() {
        let csv = "subject_id,hadm_id,category,chart_time,text,hours_outside_icu\n\
                   1,10,Discharge summary,2150-01-01,\"Sex: F\nok\",12.5\n\
                   1,,Nursing,2150-01-01,vitals stable,\n";
        let notes = read_notes_csv(csv.as_bytes()).unwrap();
        assert_eq!(notes.len(), 2);
        assert_eq!(notes[0].note_id, "0");
        assert_eq!(notes[0].hadm_id.as_deref(), Some("10"));
        assert_eq!(notes[0].hours_outside_icu, Some(12.5));
        assert!(notes[0].is_discharge());
        assert_eq!(notes[1].hadm_id, None);
        assert_eq!(notes[1].hours_outside_icu, None);
        assert!(!notes[1].is_discharge());
    }

    #[test]
    fn jsonl_notes() {
        let jsonl = r#"{"note_id":"a","subject_id":"7","hadm_id":"70","category":"discharge","chart_time":"","text":"x"}

{"subject_id":"7","category":"radiology","text":"y","hours_outside_icu":3}
"#;
        let notes = read_notes_jsonl(jsonl.as_bytes()).unwrap();
        assert_eq!(notes[0].note_id, "a");
        assert_eq!(notes[1].note_id, "1");
        assert_eq!(notes[1].hours_outside_icu, Some(3.0));
    }

    #[test]
    fn empty_subject_or_text_rejected() {
        let csv = "subject_id,hadm_id,category,chart_time,text\n,1,discharge,,x\n";
        assert!(read_notes_csv(csv.as_bytes()).is_err());
        let csv = "subject_id,hadm_id,category,chart_time,text\n1,1,discharge,,\n";
        assert!(read_notes_csv(csv.as_bytes()).is_err());
    }

    #[test]
    fn labeled_document_length_invariant() {
        let toks = tokenize("a b");
        assert!(LabeledDocument::new("d", toks, vec![Label::Other]).is_err());
    }
}
