//! Concept recall of discharge summaries against the rest of the record.
//!
//! Recall is |summary CUIs ∩ other CUIs| / |summary CUIs|, where "other" is
//! the union over every non-discharge note of the same admission or the same
//! patient. Discharge-category notes never enter a comparison set.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::concepts::{cui_set, Gazetteer};
use crate::corpus::{split_sections, HeaderSet, NoteRecord};
use crate::{par, Error, Result};

/// |discharge ∩ other| / |discharge|, and 1.0 for an empty discharge set.
pub fn recall(discharge: &BTreeSet<String>, other: &BTreeSet<String>) -> f64 {
    if discharge.is_empty() {
        return 1.0;
    }
    let hit = discharge.iter().filter(|c| other.contains(*c)).count();
    hit as f64 / discharge.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupMode {
    /// Compare against notes of the same `hadm_id`.
    ByAdmission,
    /// Compare against notes of the same `subject_id`.
    BySubject,
}

impl std::str::FromStr for GroupMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "by_admission" | "by_hadm_id" | "admission" => Ok(GroupMode::ByAdmission),
            "by_subject" | "by_subject_id" | "subject" => Ok(GroupMode::BySubject),
            _ => Err(Error::Config(format!("unknown recall mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecall {
    pub note_id: String,
    pub subject_id: String,
    pub hadm_id: Option<String>,
    pub recall: f64,
    pub n_discharge_cuis: usize,
    pub n_other_cuis: usize,
    pub n_other_notes: usize,
    pub hours_outside_icu: Option<f64>,
}

impl SummaryRecall {
    /// No concepts in the summary; recall is 1.0 by convention.
    pub fn is_vacuous(&self) -> bool {
        self.n_discharge_cuis == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallAggregates {
    pub mode: GroupMode,
    pub n_summaries: usize,
    /// Unweighted mean over `per_summary`.
    pub mean_recall: f64,
    pub n_vacuous: usize,
    pub mean_recall_nonvacuous: Option<f64>,
    /// Summaries excluded because the grouping key was missing.
    pub n_skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallReport {
    pub per_summary: Vec<SummaryRecall>,
    pub aggregates: RecallAggregates,
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn group_key(note: &NoteRecord, mode: GroupMode) -> Option<&str> {
    match mode {
        GroupMode::ByAdmission => note.hadm_id.as_deref(),
        GroupMode::BySubject => Some(note.subject_id.as_str()),
    }
}

/// Union of CUIs and note count per group key over non-discharge notes.
fn comparison_sets<'a>(
    notes: &'a [NoteRecord],
    sets: &[BTreeSet<String>],
    mode: GroupMode,
) -> BTreeMap<&'a str, (BTreeSet<String>, usize)> {
    let mut groups: BTreeMap<&str, (BTreeSet<String>, usize)> = BTreeMap::new();
    for (note, set) in notes.iter().zip(sets) {
        if note.is_discharge() {
            continue;
        }
        if let Some(key) = group_key(note, mode) {
            let entry = groups.entry(key).or_default();
            entry.0.extend(set.iter().cloned());
            entry.1 += 1;
        }
    }
    groups
}

/// Per-summary recall of every discharge note against the rest of its
/// admission or patient record.
pub fn upper_bound_report(
    notes: &[NoteRecord],
    gaz: &Gazetteer,
    mode: GroupMode,
) -> Result<RecallReport> {
    if !notes.iter().any(NoteRecord::is_discharge) {
        return Err(Error::NoteInput("no discharge-category notes".into()));
    }
    let sets = par::map(notes, |n| cui_set(&n.text, gaz));
    Ok(report_from_sets(notes, &sets, mode))
}

/// Same as [`upper_bound_report`] with CUI sets already extracted, one per note.
pub fn report_from_sets(
    notes: &[NoteRecord],
    sets: &[BTreeSet<String>],
    mode: GroupMode,
) -> RecallReport {
    let groups = comparison_sets(notes, sets, mode);
    let empty = (BTreeSet::new(), 0);

    let mut per_summary = Vec::new();
    let mut n_skipped = 0;
    for (note, set) in notes.iter().zip(sets) {
        if !note.is_discharge() {
            continue;
        }
        let Some(key) = group_key(note, mode) else {
            n_skipped += 1;
            continue;
        };
        let (other, n_other_notes) = groups.get(key).unwrap_or(&empty);
        per_summary.push(SummaryRecall {
            note_id: note.note_id.clone(),
            subject_id: note.subject_id.clone(),
            hadm_id: note.hadm_id.clone(),
            recall: recall(set, other),
            n_discharge_cuis: set.len(),
            n_other_cuis: other.len(),
            n_other_notes: *n_other_notes,
            hours_outside_icu: note.hours_outside_icu,
        });
    }

    let aggregates = RecallAggregates {
        mode,
        n_summaries: per_summary.len(),
        mean_recall: mean(per_summary.iter().map(|s| s.recall)).unwrap_or(f64::NAN),
        n_vacuous: per_summary.iter().filter(|s| s.is_vacuous()).count(),
        mean_recall_nonvacuous: mean(
            per_summary
                .iter()
                .filter(|s| !s.is_vacuous())
                .map(|s| s.recall),
        ),
        n_skipped,
    };
    RecallReport {
        per_summary,
        aggregates,
    }
}

impl RecallReport {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let to_err = |e: csv::Error| Error::NoteInput(e.to_string());
        wtr.write_record([
            "note_id",
            "subject_id",
            "hadm_id",
            "recall",
            "n_discharge_cuis",
            "n_other_cuis",
            "n_other_notes",
            "hours_outside_icu",
        ])
        .map_err(to_err)?;
        for s in &self.per_summary {
            wtr.write_record([
                s.note_id.clone(),
                s.subject_id.clone(),
                s.hadm_id.clone().unwrap_or_default(),
                s.recall.to_string(),
                s.n_discharge_cuis.to_string(),
                s.n_other_cuis.to_string(),
                s.n_other_notes.to_string(),
                s.hours_outside_icu.map(|h| h.to_string()).unwrap_or_default(),
            ])
            .map_err(to_err)?;
        }
        wtr.flush()
            .map_err(|e| Error::io("<recall csv>", e))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionRecall {
    pub section: String,
    pub mean_recall: Option<f64>,
    pub n_summaries: usize,
    /// Summaries lacking this section.
    pub n_missing: usize,
}

/// Mean recall of named discharge-summary sections against the non-discharge
/// notes of the same admission. Summaries without a `hadm_id` are ignored.
/// `"Sex"` is answered from structured data instead; see [`gender_recall`].
pub fn section_recall_report(
    notes: &[NoteRecord],
    gaz: &Gazetteer,
    headers: &HeaderSet,
    sections: &[&str],
) -> Vec<SectionRecall> {
    let comparison_idx: Vec<usize> = (0..notes.len())
        .filter(|&i| !notes[i].is_discharge() && notes[i].hadm_id.is_some())
        .collect();
    let comparison_sets = par::map(&comparison_idx, |&i| cui_set(&notes[i].text, gaz));
    let mut by_admission: BTreeMap<&str, BTreeSet<String>> = BTreeMap::new();
    for (&i, set) in comparison_idx.iter().zip(comparison_sets) {
        by_admission
            .entry(notes[i].hadm_id.as_deref().unwrap_or_default())
            .or_default()
            .extend(set);
    }

    let summaries: Vec<&NoteRecord> = notes
        .iter()
        .filter(|n| n.is_discharge() && n.hadm_id.is_some())
        .collect();
    // per summary: one recall per requested section, None when absent
    let per_summary: Vec<Vec<Option<f64>>> = par::map(&summaries, |note| {
        let split = split_sections(note, headers);
        let empty = BTreeSet::new();
        let other = by_admission
            .get(note.hadm_id.as_deref().unwrap_or_default())
            .unwrap_or(&empty);
        sections
            .iter()
            .map(|name| {
                split
                    .section_text(name)
                    .map(|body| recall(&cui_set(&body, gaz), other))
            })
            .collect()
    });

    sections
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let values: Vec<f64> = per_summary.iter().filter_map(|v| v[k]).collect();
            SectionRecall {
                section: name.to_string(),
                mean_recall: mean(values.iter().copied()),
                n_summaries: values.len(),
                n_missing: per_summary.len() - values.len(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenderRecall {
    /// matched / (summaries with a structured record)
    pub fraction: Option<f64>,
    pub n_summaries: usize,
    pub n_matched: usize,
    /// Sex section missing or not M/F; counted as mismatches.
    pub n_unparseable: usize,
    /// Subject absent from the structured table; excluded from the fraction.
    pub n_no_structured: usize,
}

/// Normalizes "M", "male", "F", "Female" (any case) to `'M'` / `'F'`.
pub fn parse_sex(value: &str) -> Option<char> {
    let word: String = value
        .trim()
        .chars()
        .take_while(|c| c.is_alphabetic())
        .flat_map(char::to_lowercase)
        .collect();
    match word.as_str() {
        "m" | "male" => Some('M'),
        "f" | "female" => Some('F'),
        _ => None,
    }
}

/// Fraction of discharge summaries whose Sex section agrees with the
/// structured record for the subject.
pub fn gender_recall(
    notes: &[NoteRecord],
    headers: &HeaderSet,
    structured: &BTreeMap<String, String>,
) -> GenderRecall {
    let mut out = GenderRecall {
        fraction: None,
        n_summaries: 0,
        n_matched: 0,
        n_unparseable: 0,
        n_no_structured: 0,
    };
    for note in notes.iter().filter(|n| n.is_discharge()) {
        let Some(recorded) = structured.get(&note.subject_id).and_then(|v| parse_sex(v)) else {
            out.n_no_structured += 1;
            continue;
        };
        out.n_summaries += 1;
        let split = split_sections(note, headers);
        match split.section_text("Sex").as_deref().and_then(parse_sex) {
            Some(s) if s == recorded => out.n_matched += 1,
            Some(_) => {}
            None => out.n_unparseable += 1,
        }
    }
    if out.n_summaries > 0 {
        out.fraction = Some(out.n_matched as f64 / out.n_summaries as f64);
    }
    out
}

/// Reads a `subject_id,sex` CSV.
pub fn read_structured_sex(path: &Path) -> Result<BTreeMap<String, String>> {
    #[derive(Deserialize)]
    struct Row {
        subject_id: String,
        sex: String,
    }
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::NoteInput(e.to_string()))?;
    rdr.deserialize()
        .map(|row| {
            let row: Row = row.map_err(|e| Error::NoteInput(e.to_string()))?;
            Ok((row.subject_id, row.sex))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScatterAxis {
    NOtherNotes,
    NOtherCuis,
    HoursOutsideIcu,
}

impl ScatterAxis {
    pub fn name(self) -> &'static str {
        match self {
            ScatterAxis::NOtherNotes => "n_other_notes",
            ScatterAxis::NOtherCuis => "n_other_cuis",
            ScatterAxis::HoursOutsideIcu => "hours_outside_icu",
        }
    }
}

impl std::str::FromStr for ScatterAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "n_other_notes" => Ok(ScatterAxis::NOtherNotes),
            "n_other_cuis" => Ok(ScatterAxis::NOtherCuis),
            "hours_outside_icu" => Ok(ScatterAxis::HoursOutsideIcu),
            _ => Err(Error::Config(format!("unknown scatter axis {s:?}"))),
        }
    }
}

/// One `(x, recall)` pair per summary.
pub fn scatter_data(report: &RecallReport, axis: ScatterAxis) -> Result<Vec<(f64, f64)>> {
    report
        .per_summary
        .iter()
        .map(|s| {
            let x = match axis {
                ScatterAxis::NOtherNotes => s.n_other_notes as f64,
                ScatterAxis::NOtherCuis => s.n_other_cuis as f64,
                ScatterAxis::HoursOutsideIcu => s
                    .hours_outside_icu
                    .ok_or(Error::MissingCovariate("hours_outside_icu"))?,
            };
            Ok((x, s.recall))
        })
        .collect()
}

pub fn write_scatter_csv<W: Write>(mut w: W, axis: ScatterAxis, rows: &[(f64, f64)]) -> Result<()> {
    let io = |e| Error::io("<scatter csv>", e);
    writeln!(w, "{},recall", axis.name()).map_err(io)?;
    for (x, y) in rows {
        writeln!(w, "{x},{y}").map_err(io)?;
    }
    Ok(())
}
