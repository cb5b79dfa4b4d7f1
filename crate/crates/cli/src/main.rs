//! `dischargesum` command-line front end.
//!
//! Exit codes: 0 on success, 1 on a usage or validation error, 2 when a
//! command fails after its inputs were accepted.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use commands::{CliError, Run};
use config::RunConfig;
use manifest::RunManifest;

#[derive(Debug, Parser)]
#[command(name = "dischargesum", version, about = "Discharge-summary concept recall and HPI topic labeling")]
struct Cli {
    /// TOML or JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for outputs and the run manifest.
    #[arg(long, global = true, env = "DISCHARGESUM_OUT_DIR", default_value = "runs")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Split discharge notes into named sections (sections.jsonl).
    SplitSections(SplitArgs),
    /// Gazetteer concept extraction with subsumption (concepts.csv, cui_sets.csv).
    ExtractCuis(ExtractArgs),
    /// Concept recall of discharge summaries against the rest of the record.
    Recall(RecallArgs),
    /// Train word2vec vectors (vectors.txt).
    PretrainEmbeddings(PretrainArgs),
    /// Train the BiLSTM-CRF labeler on a seeded 70/15/15 split.
    Train(TrainArgs),
    /// Score a checkpoint on annotated documents.
    Evaluate(EvaluateArgs),
    /// Label plain-text notes with a checkpoint (predictions.tsv).
    Predict(PredictArgs),
    /// Embedding source × character-embedding comparison (ablation.csv).
    Ablate(AblateArgs),
    /// Summarize a run directory next to the reference figures.
    Report(ReportArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::SplitSections(_) => "split-sections",
            Command::ExtractCuis(_) => "extract-cuis",
            Command::Recall(_) => "recall",
            Command::PretrainEmbeddings(_) => "pretrain-embeddings",
            Command::Train(_) => "train",
            Command::Evaluate(_) => "evaluate",
            Command::Predict(_) => "predict",
            Command::Ablate(_) => "ablate",
            Command::Report(_) => "report",
        }
    }
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    notes: Option<PathBuf>,
    /// Header list: one `Name` or `Name<TAB>regex` per line.
    #[arg(long)]
    headers: Option<PathBuf>,
    /// Include non-discharge notes.
    #[arg(long)]
    all: bool,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    notes: Option<PathBuf>,
    /// `phrase<TAB>CUI` lines.
    #[arg(long)]
    gazetteer: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RecallArgs {
    #[arg(long)]
    notes: Option<PathBuf>,
    #[arg(long)]
    gazetteer: Option<PathBuf>,
    /// by-admission (default) or by-subject.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    headers: Option<PathBuf>,
    /// Comma-separated section names for per-section recall.
    #[arg(long, value_delimiter = ',')]
    sections: Vec<String>,
    /// `subject_id,sex` CSV used for the Sex section.
    #[arg(long)]
    structured_sex: Option<PathBuf>,
    /// Comma-separated covariates: n_other_notes, n_other_cuis, hours_outside_icu.
    #[arg(long, value_delimiter = ',')]
    scatter: Vec<String>,
}

#[derive(Debug, Args)]
pub struct PretrainArgs {
    /// Notes (.csv/.jsonl) or plain text with one sequence per line.
    #[arg(long)]
    input: Option<PathBuf>,
    /// cbow or skipgram.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    negatives: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    min_count: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Keep token case instead of lowercasing.
    #[arg(long)]
    keep_case: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Directory of .xml/.txt pairs or JSON lines of labeled documents.
    #[arg(long)]
    annotations: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// learned, pretrained-finetuned or pretrained-frozen.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    no_chars: bool,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    dropout: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitChoice {
    All,
    Train,
    Dev,
    Test,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    annotations: Option<PathBuf>,
    /// Evaluate on one part of the seeded split instead of every document.
    #[arg(long, value_enum, default_value = "all")]
    split: SplitChoice,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// A text file, or a directory of .txt files.
    #[arg(long)]
    input: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long)]
    annotations: Option<PathBuf>,
    /// Vector file as `name=path` or `path`; repeatable.
    #[arg(long)]
    embeddings: Vec<String>,
    /// Word mode for pretrained rows: pretrained-finetuned or pretrained-frozen.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    max_epochs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory holding earlier outputs; defaults to --out-dir.
    #[arg(long)]
    run_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let name = cli.command.name();

    if let Err(e) = std::fs::create_dir_all(&cli.out_dir) {
        eprintln!("error: cannot create {}: {e}", cli.out_dir.display());
        return ExitCode::from(2);
    }
    let mut manifest = RunManifest::new(name, cli.seed.unwrap_or(config::DEFAULT_SEED));
    if let Err(e) = manifest.write(&cli.out_dir) {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }

    let result = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(CliError::Validation).and_then(|cfg| {
            manifest.add_input(path).map_err(CliError::Validation)?;
            Ok(cfg)
        }),
        None => Ok(RunConfig::default()),
    }
    .and_then(|cfg| {
        let mut run = Run {
            out_dir: &cli.out_dir,
            manifest: &mut manifest,
        };
        commands::run(&cli.command, cfg, cli.seed, &mut run)
    });

    let code = match &result {
        Ok(()) => {
            manifest.finish("ok", None);
            0
        }
        Err(err) => {
            let msg = commands::describe(err);
            eprintln!("error: {msg}");
            let (status, code) = match err {
                CliError::Validation(_) => ("validation-error", 1),
                CliError::Runtime(_) => ("runtime-error", 2),
            };
            manifest.finish(status, Some(msg));
            code
        }
    };
    if let Err(e) = manifest.write(&cli.out_dir) {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    ExitCode::from(code)
}
