use std::ops::Range;
use std::path::Path;

use regex::Regex;

use super::NoteRecord;
use crate::{Error, Result};

pub const UNKNOWN_SECTION: &str = "UNKNOWN";

/// Section names recognized when no header file is supplied.
pub const DEFAULT_HEADERS: &[&str] = &[
    "Admission Date",
    "Discharge Date",
    "Date of Birth",
    "Sex",
    "Service",
    "Allergies",
    "Attending",
    "Chief Complaint",
    "Major Surgical or Invasive Procedure",
    "History of Present Illness",
    "Past Medical History",
    "Social History",
    "Family History",
    "Physical Exam",
    "Pertinent Results",
    "Brief Hospital Course",
    "Medications on Admission",
    "Discharge Medications",
    "Discharge Disposition",
    "Discharge Diagnosis",
    "Discharge Condition",
    "Discharge Instructions",
    "Followup Instructions",
];

#[derive(Debug, Clone)]
pub struct HeaderPattern {
    pub name: String,
    regex: Regex,
}

impl HeaderPattern {
    /// Compiles `pattern` in multi-line mode. The pattern must anchor at line
    /// start: after any leading inline-flag group it has to begin with `^`.
    pub fn new(name: impl Into<String>, pattern: &str) -> Result<Self> {
        let body = strip_flag_group(pattern);
        if !body.starts_with('^') {
            return Err(Error::HeaderPattern {
                pattern: pattern.to_string(),
                reason: "pattern must anchor at line start with '^'".into(),
            });
        }
        let regex = Regex::new(&format!("(?m){pattern}")).map_err(|e| Error::HeaderPattern {
            pattern: pattern.to_string(),
            reason: e.to_string(),
        })?;
        Ok(HeaderPattern {
            name: name.into(),
            regex,
        })
    }

    /// Case-insensitive `Name:` at line start, tolerant of extra whitespace.
    pub fn for_name(name: &str) -> Result<Self> {
        let words: Vec<String> = name.split_whitespace().map(regex::escape).collect();
        let pattern = format!(r"(?i)^[ \t]*{}[ \t]*:[ \t]*", words.join(r"\s+"));
        Self::new(name, &pattern)
    }

    pub fn as_str(&self) -> &str {
        self.regex.as_str()
    }
}

fn strip_flag_group(pattern: &str) -> &str {
    if let Some(rest) = pattern.strip_prefix("(?") {
        if let Some(close) = rest.find(')') {
            let flags = &rest[..close];
            if flags.chars().all(|c| c.is_ascii_alphabetic() || c == '-') {
                return &rest[close + 1..];
            }
        }
    }
    pattern
}

#[derive(Debug, Clone)]
pub struct HeaderSet {
    patterns: Vec<HeaderPattern>,
}

impl HeaderSet {
    pub fn new(patterns: Vec<HeaderPattern>) -> Result<Self> {
        if patterns.is_empty() {
            return Err(Error::HeaderPattern {
                pattern: String::new(),
                reason: "header list is empty".into(),
            });
        }
        Ok(HeaderSet { patterns })
    }

    pub fn from_names(names: &[&str]) -> Result<Self> {
        Self::new(names.iter().map(|n| HeaderPattern::for_name(n)).collect::<Result<_>>()?)
    }

    /// Parses a header config. Each non-blank line not starting with `#` is
    /// either `Name` (default pattern) or `Name<TAB>pattern`.
    pub fn parse(config: &str) -> Result<Self> {
        let mut patterns = Vec::new();
        for line in config.lines() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            match line.split_once('\t') {
                Some((name, pattern)) => patterns.push(HeaderPattern::new(name.trim(), pattern)?),
                None => patterns.push(HeaderPattern::for_name(line.trim())?),
            }
        }
        Self::new(patterns)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn patterns(&self) -> &[HeaderPattern] {
        &self.patterns
    }
}

impl Default for HeaderSet {
    fn default() -> Self {
        Self::from_names(DEFAULT_HEADERS).expect("default headers compile")
    }
}

/// One section of a note. Ranges are byte offsets into the note text; the
/// header range is empty for the leading `UNKNOWN` section.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Section {
    pub name: String,
    pub header: Range<usize>,
    pub body: Range<usize>,
}

#[derive(Debug, Clone)]
pub struct SectionedSummary {
    pub source: NoteRecord,
    pub sections: Vec<Section>,
}

impl SectionedSummary {
    pub fn header_text(&self, section: &Section) -> &str {
        &self.source.text[section.header.clone()]
    }

    pub fn body_text(&self, section: &Section) -> &str {
        &self.source.text[section.body.clone()]
    }

    /// First section with the given canonical name.
    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.name == name)
    }

    /// Concatenated bodies of every section with this name.
    pub fn section_text(&self, name: &str) -> Option<String> {
        let bodies: Vec<&str> = self
            .sections
            .iter()
            .filter(|s| s.name == name)
            .map(|s| self.body_text(s))
            .collect();
        if bodies.is_empty() {
            None
        } else {
            Some(bodies.join("\n"))
        }
    }

    /// Headers and bodies in order. Always equal to the source text.
    pub fn reconstruct(&self) -> String {
        let mut out = String::with_capacity(self.source.text.len());
        for s in &self.sections {
            out.push_str(self.header_text(s));
            out.push_str(self.body_text(s));
        }
        out
    }
}

/// Splits a note into sections at header matches. Text before the first
/// header (or the whole note, when nothing matches) becomes `UNKNOWN`.
/// Overlapping header matches resolve to the earliest, then longest, then
/// first-configured pattern.
pub fn split_sections(note: &NoteRecord, headers: &HeaderSet) -> SectionedSummary {
    let text = note.text.as_str();

    let mut matches: Vec<(usize, usize, usize)> = Vec::new();
    for (pi, pattern) in headers.patterns.iter().enumerate() {
        for m in pattern.regex.find_iter(text) {
            if !m.is_empty() {
                matches.push((m.start(), m.end(), pi));
            }
        }
    }
    matches.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)).then(a.2.cmp(&b.2)));

    let mut accepted: Vec<(usize, usize, usize)> = Vec::new();
    for m in matches {
        if accepted.last().is_none_or(|last| m.0 >= last.1) {
            accepted.push(m);
        }
    }

    let mut sections = Vec::with_capacity(accepted.len() + 1);
    let first_start = accepted.first().map_or(text.len(), |m| m.0);
    if first_start > 0 || accepted.is_empty() {
        sections.push(Section {
            name: UNKNOWN_SECTION.to_string(),
            header: 0..0,
            body: 0..first_start,
        });
    }
    for (i, &(start, end, pi)) in accepted.iter().enumerate() {
        let body_end = accepted.get(i + 1).map_or(text.len(), |next| next.0);
        sections.push(Section {
            name: headers.patterns[pi].name.clone(),
            header: start..end,
            body: end..body_end,
        });
    }

    SectionedSummary {
        source: note.clone(),
        sections,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn note(text: &str) -> NoteRecord {
        NoteRecord::new("s1", Some("h1"), "discharge", text)
    }

    fn trimmed(summary: &SectionedSummary) -> Vec<(String, String)> {
        summary
            .sections
            .iter()
            .map(|s| (s.name.clone(), summary.body_text(s).trim().to_string()))
            .collect()
    }

    #[test]
    fn splits_on_direct_header_matches() {
        let headers = HeaderSet::default();
        let s = split_sections(&note("Sex: F\nHistory of Present Illness:\npt is..."), &headers);
        assert_eq!(
            trimmed(&s),
            vec![
                ("Sex".to_string(), "F".to_string()),
                ("History of Present Illness".to_string(), "pt is...".to_string()),
            ]
        );
    }

    #[test]
    fn no_headers_yields_single_unknown() {
        let text = "patient doing well\nno complaints";
        let s = split_sections(&note(text), &HeaderSet::default());
        assert_eq!(s.sections.len(), 1);
        assert_eq!(s.sections[0].name, UNKNOWN_SECTION);
        assert_eq!(s.body_text(&s.sections[0]), text);
    }

    #[test]
    fn preamble_goes_to_unknown() {
        let s = split_sections(&note("Name: X\nSex: M\n"), &HeaderSet::default());
        assert_eq!(s.sections[0].name, UNKNOWN_SECTION);
        assert_eq!(s.body_text(&s.sections[0]), "Name: X\n");
        assert_eq!(s.sections[1].name, "Sex");
    }

    #[test]
    fn five_header_summary_reconstructs_exactly() {
        let text = "Date of Birth: 2080-01-01\nSex: F\n\nChief Complaint:\nchest pain\n\n\
                    Major Surgical or Invasive Procedure:\ncardiac cath\n\n\
                    History of Present Illness:\n65yo woman with chest pain.\n";
        let s = split_sections(&note(text), &HeaderSet::default());
        let names: Vec<&str> = s.sections.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(
            names,
            [
                "Date of Birth",
                "Sex",
                "Chief Complaint",
                "Major Surgical or Invasive Procedure",
                "History of Present Illness"
            ]
        );
        // oracle: plain concatenation of header and body slices
        let mut rebuilt = String::new();
        for sec in &s.sections {
            rebuilt += &text[sec.header.clone()];
            rebuilt += &text[sec.body.clone()];
        }
        assert_eq!(rebuilt, text);
    }

    #[test]
    fn headers_are_case_insensitive_and_mid_line_text_is_not_a_header() {
        let s = split_sections(
            &note("CHIEF COMPLAINT: cough\nshe denies chief complaint: none\n"),
            &HeaderSet::default(),
        );
        assert_eq!(s.sections.len(), 1);
        assert_eq!(s.sections[0].name, "Chief Complaint");
    }

    #[test]
    fn config_parsing() {
        let cfg = "# comment\nSex\nHPI\t(?i)^history of present illness:\n\n";
        let set = HeaderSet::parse(cfg).unwrap();
        assert_eq!(set.patterns().len(), 2);
        assert_eq!(set.patterns()[1].name, "HPI");
        let s = split_sections(&note("history of present illness: x"), &set);
        assert_eq!(s.sections[0].name, "HPI");
    }

    #[test]
    fn unanchored_pattern_is_rejected() {
        assert!(HeaderSet::parse("Sex\tSex:").is_err());
        assert!(HeaderSet::parse("Sex\t(?i)Sex:").is_err());
        assert!(HeaderSet::parse("").is_err());
    }

    proptest! {
        #[test]
        fn splitting_is_lossless(
            parts in proptest::collection::vec(
                (proptest::sample::select(DEFAULT_HEADERS), "[a-z0-9 .,\n]{0,30}"),
                0..6,
            ),
            preamble in "[a-z .\n]{0,20}",
        ) {
            let mut text = preamble.clone();
            for (name, body) in &parts {
                text.push('\n');
                text.push_str(name);
                text.push_str(": ");
                text.push_str(body);
            }
            prop_assume!(!text.is_empty());
            let s = split_sections(&note(&text), &HeaderSet::default());
            prop_assert_eq!(s.reconstruct(), text.clone());
            let mut pos = 0;
            for sec in &s.sections {
                prop_assert_eq!(sec.header.start, pos);
                prop_assert_eq!(sec.header.end, sec.body.start);
                pos = sec.body.end;
            }
            prop_assert_eq!(pos, text.len());
        }
    }
}
