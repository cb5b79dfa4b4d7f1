use std::fmt::Write as _;

use serde::Serialize;

use super::TaggerModel;
use crate::corpus::{Label, LabeledDocument, NUM_LABELS};
use crate::{par, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelMetrics {
    pub label: Label,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Gold tokens with this label.
    pub support: usize,
    /// Tokens predicted as this label.
    pub predicted: usize,
}

/// Token-level metrics. `confusion[p][t]` counts tokens predicted `p` whose
/// gold label is `t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub per_label: Vec<LabelMetrics>,
    pub accuracy: f64,
    /// Mean F1 over labels that occur in the gold or predicted labels.
    pub macro_f1: f64,
    /// Support-weighted mean F1.
    pub weighted_f1: f64,
    pub n_tokens: usize,
    pub confusion: Vec<Vec<usize>>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl EvalReport {
    pub fn from_confusion(confusion: Vec<Vec<usize>>) -> Self {
        assert_eq!(confusion.len(), NUM_LABELS);
        let n_tokens: usize = confusion.iter().flatten().sum();
        let correct: usize = (0..NUM_LABELS).map(|i| confusion[i][i]).sum();
        let per_label: Vec<LabelMetrics> = Label::ALL
            .iter()
            .map(|&label| {
                let k = label.id();
                let tp = confusion[k][k];
                let predicted: usize = confusion[k].iter().sum();
                let support: usize = confusion.iter().map(|row| row[k]).sum();
                let precision = ratio(tp, predicted);
                let recall = ratio(tp, support);
                let f1 = if precision + recall == 0.0 {
                    0.0
                } else {
                    2.0 * precision * recall / (precision + recall)
                };
                LabelMetrics {
                    label,
                    precision,
                    recall,
                    f1,
                    support,
                    predicted,
                }
            })
            .collect();
        let present: Vec<&LabelMetrics> = per_label.iter().filter(|m| m.support + m.predicted > 0).collect();
        let macro_f1 = if present.is_empty() {
            0.0
        } else {
            present.iter().map(|m| m.f1).sum::<f64>() / present.len() as f64
        };
        let weighted_f1 = if n_tokens == 0 {
            0.0
        } else {
            per_label.iter().map(|m| m.f1 * m.support as f64).sum::<f64>() / n_tokens as f64
        };
        EvalReport {
            per_label,
            accuracy: ratio(correct, n_tokens),
            macro_f1,
            weighted_f1,
            n_tokens,
            confusion,
        }
    }

    /// Builds the report from paired gold and predicted sequences.
    pub fn from_predictions(gold: &[Vec<Label>], predicted: &[Vec<Label>]) -> Result<Self> {
        if gold.len() != predicted.len() {
            return Err(Error::LengthMismatch {
                scores: predicted.len(),
                labels: gold.len(),
            });
        }
        let mut confusion = vec![vec![0usize; NUM_LABELS]; NUM_LABELS];
        for (g, p) in gold.iter().zip(predicted) {
            if g.len() != p.len() {
                return Err(Error::LengthMismatch {
                    scores: p.len(),
                    labels: g.len(),
                });
            }
            for (t, q) in g.iter().zip(p) {
                confusion[q.id()][t.id()] += 1;
            }
        }
        Ok(Self::from_confusion(confusion))
    }

    pub fn metrics_csv(&self) -> String {
        let mut out = String::from("label,precision,recall,f1,support,predicted\n");
        for m in &self.per_label {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                m.label.name(),
                m.precision,
                m.recall,
                m.f1,
                m.support,
                m.predicted
            )
            .unwrap();
        }
        let weighted = |f: fn(&LabelMetrics) -> f64| {
            if self.n_tokens == 0 {
                0.0
            } else {
                self.per_label.iter().map(|m| f(m) * m.support as f64).sum::<f64>() / self.n_tokens as f64
            }
        };
        writeln!(
            out,
            "weighted avg,{},{},{},{},{}",
            weighted(|m| m.precision),
            weighted(|m| m.recall),
            self.weighted_f1,
            self.n_tokens,
            self.n_tokens
        )
        .unwrap();
        writeln!(out, "accuracy,,,{},{},", self.accuracy, self.n_tokens).unwrap();
        out
    }

    /// Rows are predicted labels, columns gold labels.
    pub fn confusion_csv(&self) -> String {
        let mut out = String::from("predicted\\true");
        for l in Label::ALL {
            write!(out, ",{}", l.name()).unwrap();
        }
        out.push('\n');
        for (l, row) in Label::ALL.iter().zip(&self.confusion) {
            out.push_str(l.name());
            for c in row {
                write!(out, ",{c}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

pub fn predict_documents(model: &TaggerModel, docs: &[LabeledDocument]) -> Result<Vec<Vec<Label>>> {
    par::map(docs, |d| model.predict_encoded(&model.encode_document(d)))
        .into_iter()
        .collect()
}

pub fn evaluate(model: &TaggerModel, docs: &[LabeledDocument]) -> Result<EvalReport> {
    let predicted = predict_documents(model, docs)?;
    let gold: Vec<Vec<Label>> = docs.iter().map(|d| d.labels.clone()).collect();
    EvalReport::from_predictions(&gold, &predicted)
}
