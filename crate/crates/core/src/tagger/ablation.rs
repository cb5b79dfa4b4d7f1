use std::io::Write;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::{build_model, evaluate, train, ModelConfig, TrainConfig, WordEmbeddingMode};
use crate::corpus::LabeledDocument;
use crate::{par, Result};

/// One configuration of the comparison grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationConfig {
    pub name: String,
    /// Short tag for the embedding source, e.g. `clinical-cbow`.
    pub source: String,
    pub embeddings: Option<PathBuf>,
    pub word_mode: WordEmbeddingMode,
    pub use_chars: bool,
}

/// A named pretrained vector file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSource {
    pub name: String,
    pub path: PathBuf,
}

/// Every source × {char on, char off} with `pretrained_mode`, followed by
/// learned embeddings × {char on, char off}.
pub fn ablation_grid(sources: &[EmbeddingSource], pretrained_mode: WordEmbeddingMode) -> Vec<AblationConfig> {
    let mut rows = Vec::new();
    let char_tag = |on: bool| if on { "chars" } else { "nochars" };
    for s in sources {
        for use_chars in [true, false] {
            rows.push(AblationConfig {
                name: format!("{}-{}", s.name, char_tag(use_chars)),
                source: s.name.clone(),
                embeddings: Some(s.path.clone()),
                word_mode: pretrained_mode,
                use_chars,
            });
        }
    }
    for use_chars in [true, false] {
        rows.push(AblationConfig {
            name: format!("learned-{}", char_tag(use_chars)),
            source: "learned".into(),
            embeddings: None,
            word_mode: WordEmbeddingMode::Learned,
            use_chars,
        });
    }
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum AblationStatus {
    Completed {
        dev_weighted_f1: f64,
        dev_accuracy: f64,
        best_epoch: usize,
        epochs_run: usize,
        oov_rows: Option<usize>,
    },
    Skipped { reason: String },
    Failed { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub config: AblationConfig,
    pub status: AblationStatus,
}

impl AblationRow {
    pub fn dev_f1(&self) -> Option<f64> {
        match self.status {
            AblationStatus::Completed { dev_weighted_f1, .. } => Some(dev_weighted_f1),
            _ => None,
        }
    }
}

fn run_one(
    row: &AblationConfig,
    base: &ModelConfig,
    cfg: &TrainConfig,
    train_docs: &[LabeledDocument],
    dev_docs: &[LabeledDocument],
) -> AblationStatus {
    if let Some(path) = &row.embeddings {
        if !path.is_file() {
            return AblationStatus::Skipped {
                reason: format!("embedding file {} not found", path.display()),
            };
        }
    }
    let config = ModelConfig {
        use_chars: row.use_chars,
        word_mode: row.word_mode,
        ..base.clone()
    };
    let attempt = || -> Result<AblationStatus> {
        let (model, stats) = build_model(config, train_docs, row.embeddings.as_deref(), cfg.seed)?;
        let (model, history) = train(model, cfg, train_docs, dev_docs)?;
        let report = evaluate(&model, dev_docs)?;
        Ok(AblationStatus::Completed {
            dev_weighted_f1: report.weighted_f1,
            dev_accuracy: report.accuracy,
            best_epoch: history.best_epoch,
            epochs_run: history.epochs.len(),
            oov_rows: stats.map(|s| s.oov_rows),
        })
    };
    attempt().unwrap_or_else(|e| AblationStatus::Failed { reason: e.to_string() })
}

/// Trains and scores every row with the same seed. Rows run concurrently
/// with the `parallel` feature; output order follows `rows`.
pub fn ablation_run(
    rows: &[AblationConfig],
    base: &ModelConfig,
    cfg: &TrainConfig,
    train_docs: &[LabeledDocument],
    dev_docs: &[LabeledDocument],
) -> Vec<AblationRow> {
    par::map(rows, |row| AblationRow {
        config: row.clone(),
        status: run_one(row, base, cfg, train_docs, dev_docs),
    })
}

pub fn write_ablation_csv<W: Write>(writer: W, rows: &[AblationRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| crate::Error::Config(format!("csv: {e}"));
    w.write_record([
        "name",
        "source",
        "word_mode",
        "char_embeddings",
        "status",
        "dev_weighted_f1",
        "dev_accuracy",
        "best_epoch",
        "epochs_run",
        "oov_rows",
        "note",
    ])
    .map_err(io)?;
    for r in rows {
        let c = &r.config;
        let mut rec = vec![
            c.name.clone(),
            c.source.clone(),
            c.word_mode.name().to_string(),
            c.use_chars.to_string(),
        ];
        match &r.status {
            AblationStatus::Completed {
                dev_weighted_f1,
                dev_accuracy,
                best_epoch,
                epochs_run,
                oov_rows,
            } => rec.extend([
                "completed".to_string(),
                dev_weighted_f1.to_string(),
                dev_accuracy.to_string(),
                best_epoch.to_string(),
                epochs_run.to_string(),
                oov_rows.map(|n| n.to_string()).unwrap_or_default(),
                String::new(),
            ]),
            AblationStatus::Skipped { reason } | AblationStatus::Failed { reason } => {
                let status = if matches!(r.status, AblationStatus::Skipped { .. }) {
                    "skipped"
                } else {
                    "failed"
                };
                rec.extend([status.to_string()]);
                rec.extend(std::iter::repeat(String::new()).take(5));
                rec.push(reason.clone());
            }
        }
        w.write_record(&rec).map_err(io)?;
    }
    w.flush().map_err(|e| io(e.into()))?;
    Ok(())
}
