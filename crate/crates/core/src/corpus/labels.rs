use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const NUM_LABELS: usize = 10;

/// HPI topic categories. Discriminants are the stable label ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum Label {
    Demographics = 0,
    DiagnosisHistory = 1,
    MedicationHistory = 2,
    ProcedureHistory = 3,
    SymptomsSigns = 4,
    VitalsLabs = 5,
    ProceduresResults = 6,
    MedsTreatments = 7,
    PatientMovement = 8,
    Other = 9,
}

impl Label {
    pub const ALL: [Label; NUM_LABELS] = [
        Label::Demographics,
        Label::DiagnosisHistory,
        Label::MedicationHistory,
        Label::ProcedureHistory,
        Label::SymptomsSigns,
        Label::VitalsLabs,
        Label::ProceduresResults,
        Label::MedsTreatments,
        Label::PatientMovement,
        Label::Other,
    ];

    pub fn id(self) -> usize {
        self as usize
    }

    pub fn from_id(id: usize) -> Option<Label> {
        Self::ALL.get(id).copied()
    }

    /// Display name as used in annotation files.
    pub fn name(self) -> &'static str {
        match self {
            Label::Demographics => "Demographics",
            Label::DiagnosisHistory => "DiagnosisHistory",
            Label::MedicationHistory => "MedicationHistory",
            Label::ProcedureHistory => "ProcedureHistory",
            Label::SymptomsSigns => "Symptoms/Signs",
            Label::VitalsLabs => "Vitals/Labs",
            Label::ProceduresResults => "Procedures/Results",
            Label::MedsTreatments => "Meds/Treatments",
            Label::PatientMovement => "PatientMovement",
            Label::Other => "Other",
        }
    }

    /// Parses a label name. Matching ignores case, whitespace and punctuation,
    /// so `"Symptoms/Signs"`, `"symptoms signs"` and `"SymptomsSigns"` agree.
    /// `"Movement"` is accepted for [`Label::PatientMovement`].
    pub fn parse(name: &str) -> Result<Label> {
        let key: String = name
            .chars()
            .filter(|c| c.is_alphanumeric())
            .flat_map(char::to_lowercase)
            .collect();
        let label = match key.as_str() {
            "demographics" => Label::Demographics,
            "diagnosishistory" => Label::DiagnosisHistory,
            "medicationhistory" => Label::MedicationHistory,
            "procedurehistory" => Label::ProcedureHistory,
            "symptomssigns" => Label::SymptomsSigns,
            "vitalslabs" => Label::VitalsLabs,
            "proceduresresults" => Label::ProceduresResults,
            "medstreatments" => Label::MedsTreatments,
            "patientmovement" | "movement" => Label::PatientMovement,
            "other" => Label::Other,
            _ => return Err(Error::UnknownLabel(name.to_string())),
        };
        Ok(label)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_are_stable_and_dense() {
        for (i, label) in Label::ALL.iter().enumerate() {
            assert_eq!(label.id(), i);
            assert_eq!(Label::from_id(i), Some(*label));
        }
        assert_eq!(Label::from_id(NUM_LABELS), None);
    }

    #[test]
    fn names_round_trip() {
        for label in Label::ALL {
            assert_eq!(Label::parse(label.name()).unwrap(), label);
        }
        assert_eq!(Label::parse("symptoms / signs").unwrap(), Label::SymptomsSigns);
        assert_eq!(Label::parse("Movement").unwrap(), Label::PatientMovement);
    }

    #[test]
    fn unknown_label_names_the_offender() {
        let err = Label::parse("Allergies").unwrap_err();
        assert!(err.to_string().contains("Allergies"));
    }
}
