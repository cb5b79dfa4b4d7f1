use std::collections::BTreeMap;
use std::fs;
use std::io::BufRead;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use dischargesum::concepts::{char_slice, extract_concepts, subsumption_filter, Gazetteer};
use dischargesum::corpus::{
    load_annotated_dir, read_notes, split_dataset, split_sections, tokenize, HeaderSet,
    LabeledDocument, NoteRecord,
};
use dischargesum::embeddings::{build_vocab, save_embeddings, train_word2vec, Word2VecMode};
use dischargesum::overlap::{
    gender_recall, read_structured_sex, scatter_data, section_recall_report, upper_bound_report,
    write_scatter_csv, GroupMode, ScatterAxis,
};
use dischargesum::tagger::{
    ablation_grid, ablation_run, build_model, evaluate, train, write_ablation_csv, EmbeddingSource,
    TaggerModel, WordEmbeddingMode,
};
use dischargesum::{par, reference};
use serde::Serialize;
use serde_json::json;

use crate::config::{require, RunConfig};
use crate::manifest::RunManifest;
use crate::{
    AblateArgs, Command, EvaluateArgs, ExtractArgs, PredictArgs, PretrainArgs, RecallArgs, ReportArgs,
    SplitArgs, SplitChoice, TrainArgs,
};

pub enum CliError {
    /// Bad configuration or input; exit code 1.
    Validation(anyhow::Error),
    /// Failure after validation; exit code 2.
    Runtime(anyhow::Error),
}

pub type CliResult<T> = Result<T, CliError>;

pub trait Classify<T> {
    fn invalid(self) -> CliResult<T>;
    fn runtime(self) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn invalid(self) -> CliResult<T> {
        self.map_err(|e| CliError::Validation(e.into()))
    }

    fn runtime(self) -> CliResult<T> {
        self.map_err(|e| CliError::Runtime(e.into()))
    }
}

pub struct Run<'a> {
    pub out_dir: &'a Path,
    pub manifest: &'a mut RunManifest,
}

impl Run<'_> {
    fn input(&mut self, path: &Path) -> CliResult<()> {
        if !path.exists() {
            return Err(CliError::Validation(anyhow!("input {} does not exist", path.display())));
        }
        self.manifest.add_input(path).invalid()
    }

    fn output(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> CliResult<()> {
        let path = self.out_dir.join(name);
        fs::write(&path, bytes)
            .with_context(|| format!("writing {}", path.display()))
            .runtime()?;
        self.manifest.outputs.push(name.to_string());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let text = serde_json::to_string_pretty(value).runtime()?;
        self.output(name, text + "\n")
    }

    /// Records the effective configuration once validation has finished.
    fn snapshot(&mut self, cfg: &RunConfig, seed: u64) {
        self.manifest.seed = seed;
        self.manifest.config = serde_json::to_value(cfg).unwrap_or_default();
    }
}

pub fn run(command: &Command, mut cfg: RunConfig, seed_flag: Option<u64>, run: &mut Run) -> CliResult<()> {
    let seed = cfg.apply_seed(seed_flag);
    match command {
        Command::SplitSections(a) => split_sections_cmd(a, cfg, seed, run),
        Command::ExtractCuis(a) => extract_cuis_cmd(a, cfg, seed, run),
        Command::Recall(a) => recall_cmd(a, cfg, seed, run),
        Command::PretrainEmbeddings(a) => pretrain_cmd(a, cfg, seed, run),
        Command::Train(a) => train_cmd(a, cfg, seed, run),
        Command::Evaluate(a) => evaluate_cmd(a, cfg, seed, run),
        Command::Predict(a) => predict_cmd(a, cfg, seed, run),
        Command::Ablate(a) => ablate_cmd(a, cfg, seed, run),
        Command::Report(a) => report_cmd(a, cfg, seed, run),
    }
}

fn override_path(flag: &Option<PathBuf>, slot: &mut Option<PathBuf>) {
    if flag.is_some() {
        slot.clone_from(flag);
    }
}

fn load_headers(path: Option<&Path>) -> CliResult<HeaderSet> {
    match path {
        Some(p) => HeaderSet::load(p).invalid(),
        None => Ok(HeaderSet::default()),
    }
}

fn load_notes(run: &mut Run, cfg: &RunConfig) -> CliResult<Vec<NoteRecord>> {
    let path = require(&cfg.notes, "--notes").invalid()?;
    run.input(path)?;
    read_notes(path).invalid()
}

fn load_gazetteer(run: &mut Run, cfg: &RunConfig) -> CliResult<Gazetteer> {
    let path = require(&cfg.gazetteer, "--gazetteer").invalid()?;
    run.input(path)?;
    let gaz = Gazetteer::load(path).invalid()?;
    if gaz.is_empty() {
        return Err(CliError::Validation(anyhow!("gazetteer {} has no entries", path.display())));
    }
    Ok(gaz)
}

/// Annotated documents from a directory of `.xml`/`.txt` pairs or from JSON
/// lines of labeled documents.
fn load_labeled(run: &mut Run, cfg: &RunConfig) -> CliResult<Vec<LabeledDocument>> {
    let path = require(&cfg.annotations, "--annotations").invalid()?;
    run.input(path)?;
    let docs = if path.is_dir() {
        load_annotated_dir(path).invalid()?
    } else {
        let file = fs::File::open(path).invalid()?;
        let mut docs = Vec::new();
        for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line.invalid()?;
            if line.trim().is_empty() {
                continue;
            }
            let doc: LabeledDocument = serde_json::from_str(&line)
                .with_context(|| format!("{} line {}", path.display(), i + 1))
                .invalid()?;
            if doc.tokens.len() != doc.labels.len() {
                return Err(CliError::Validation(anyhow!(
                    "{} line {}: {} tokens but {} labels",
                    path.display(),
                    i + 1,
                    doc.tokens.len(),
                    doc.labels.len()
                )));
            }
            docs.push(doc);
        }
        docs
    };
    let docs: Vec<_> = docs.into_iter().filter(|d| !d.is_empty()).collect();
    if docs.is_empty() {
        return Err(CliError::Validation(anyhow!("no non-empty documents in {}", path.display())));
    }
    Ok(docs)
}

fn split_sections_cmd(a: &SplitArgs, mut cfg: RunConfig, seed: u64, run: &mut Run) -> CliResult<()> {
    override_path(&a.notes, &mut cfg.notes);
    override_path(&a.headers, &mut cfg.headers);
    let notes = load_notes(run, &cfg)?;
    if let Some(h) = &cfg.headers {
        run.input(h)?;
    }
    let headers = load_headers(cfg.headers.as_deref())?;
    run.snapshot(&cfg, seed);

    let selected: Vec<&NoteRecord> = notes.iter().filter(|n| a.all || n.is_discharge()).collect();
    let lines = par::map(&selected, |note| {
        let split = split_sections(note, &headers);
        let sections: Vec<_> = split
            .sections
            .iter()
            .map(|s| {
                json!({
                    "name": s.name,
                    "header": split.header_text(s),
                    "body": split.body_text(s),
                    "header_bytes": [s.header.start, s.header.end],
                    "body_bytes": [s.body.start, s.body.end],
                })
            })
            .collect();
        json!({
            "note_id": note.note_id,
            "subject_id": note.subject_id,
            "hadm_id": note.hadm_id,
            "category": note.category,
            "sections": sections,
        })
        .to_string()
    });
    let mut out = String::new();
    for l in lines {
        out.push_str(&l);
        out.push('\n');
    }
    run.output("sections.jsonl", out)
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> CliResult<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).runtime()?;
    for r in rows {
        w.write_record(&r).runtime()?;
    }
    w.into_inner().map_err(|e| anyhow!("csv: {e}")).runtime()
}

fn extract_cuis_cmd(a: &ExtractArgs, mut cfg: RunConfig, seed: u64, run: &mut Run) -> CliResult<()> {
    override_path(&a.notes, &mut cfg.notes);
    override_path(&a.gazetteer, &mut cfg.gazetteer);
    let notes = load_notes(run, &cfg)?;
    let gaz = load_gazetteer(run, &cfg)?;
    run.snapshot(&cfg, seed);

    let spans = par::map(&notes, |n| subsumption_filter(&extract_concepts(&n.text, &gaz)));
    let mut span_rows = Vec::new();
    let mut set_rows = Vec::new();
    for (note, kept) in notes.iter().zip(&spans) {
        for s in kept {
            span_rows.push(vec![
                note.note_id.clone(),
                s.cui.clone(),
                s.start.to_string(),
                s.end.to_string(),
                char_slice(&note.text, s.start, s.end).to_string(),
            ]);
        }
        let set: std::collections::BTreeSet<&str> = kept.iter().map(|s| s.cui.as_str()).collect();
        set_rows.push(vec![
            note.note_id.clone(),
            note.subject_id.clone(),
            note.hadm_id.clone().unwrap_or_default(),
            note.category.clone(),
            set.len().to_string(),
            set.into_iter().collect::<Vec<_>>().join(" "),
        ]);
    }
    let spans_csv = csv_bytes(&["note_id", "cui", "start", "end", "text"], span_rows)?;
    run.output("concepts.csv", spans_csv)?;
    let sets_csv = csv_bytes(
        &["note_id", "subject_id", "hadm_id", "category", "n_cuis", "cuis"],
        set_rows,
    )?;
    run.output("cui_sets.csv", sets_csv)
}

fn recall_cmd(a: &RecallArgs, mut cfg: RunConfig, seed: u64, run: &mut Run) -> CliResult<()> {
    override_path(&a.notes, &mut cfg.notes);
    override_path(&a.gazetteer, &mut cfg.gazetteer);
    override_path(&a.headers, &mut cfg.headers);
    override_path(&a.structured_sex, &mut cfg.structured_sex);
    if let Some(m) = &a.mode {
        cfg.recall.mode = Some(m.clone());
    }
    if !a.sections.is_empty() {
        cfg.recall.sections.clone_from(&a.sections);
    }
    if !a.scatter.is_empty() {
        cfg.recall.scatter.clone_from(&a.scatter);
    }
    let mode: GroupMode = cfg.recall.mode.as_deref().unwrap_or("by-admission").parse().invalid()?;
    let axes: Vec<ScatterAxis> = cfg
        .recall
        .scatter
        .iter()
        .map(|s| s.parse())
        .collect::<Result<_, _>>()
        .invalid()?;
    let notes = load_notes(run, &cfg)?;
    let gaz = load_gazetteer(run, &cfg)?;
    if let Some(h) = &cfg.headers {
        run.input(h)?;
    }
    let headers = load_headers(cfg.headers.as_deref())?;
    let wants_sex = cfg.recall.sections.iter().any(|s| s == "Sex");
    let structured = match (&cfg.structured_sex, wants_sex) {
        (Some(p), _) => {
            run.input(p)?;
            Some(read_structured_sex(p).invalid()?)
        }
        (None, true) => {
            return Err(CliError::Validation(anyhow!(
                "section \"Sex\" needs --structured-sex with a subject_id,sex table"
            )))
        }
        (None, false) => None,
    };
    run.snapshot(&cfg, seed);

    let report = upper_bound_report(&notes, &gaz, mode).invalid()?;
    let tag = match mode {
        GroupMode::ByAdmission => "by-admission",
        GroupMode::BySubject => "by-subject",
    };
    let mut buf = Vec::new();
    report.write_csv(&mut buf).runtime()?;
    run.output(&format!("recall_{tag}.csv"), buf)?;
    run.json(&format!("recall_{tag}.json"), &report.aggregates)?;

    let text_sections: Vec<&str> = cfg
        .recall
        .sections
        .iter()
        .map(String::as_str)
        .filter(|s| *s != "Sex")
        .collect();
    if !cfg.recall.sections.is_empty() {
        let sections = section_recall_report(&notes, &gaz, &headers, &text_sections);
        let gender = structured.as_ref().map(|s| gender_recall(&notes, &headers, s));
        run.json("section_recall.json", &json!({ "sections": sections, "sex": gender }))?;
    } else if let Some(s) = &structured {
        run.json("section_recall.json", &json!({ "sections": [], "sex": gender_recall(&notes, &headers, s) }))?;
    }

    for axis in axes {
        let rows = scatter_data(&report, axis).invalid()?;
        let mut buf = Vec::new();
        write_scatter_csv(&mut buf, axis, &rows).runtime()?;
        run.output(&format!("scatter_{tag}_{}.csv", axis.name()), buf)?;
    }
    Ok(())
}

/// One token sequence per note (CSV or JSON lines) or per non-blank line of
/// plain text.
fn read_corpus(path: &Path, lowercase: bool) -> CliResult<Vec<Vec<String>>> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or_default();
    let texts: Vec<String> = if matches!(ext, "csv" | "jsonl") {
        read_notes(path).invalid()?.into_iter().map(|n| n.text).collect()
    } else {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))
            .invalid()?;
        text.lines().filter(|l| !l.trim().is_empty()).map(str::to_string).collect()
    };
    Ok(texts
        .iter()
        .map(|t| {
            tokenize(t)
                .into_iter()
                .map(|tok| if lowercase { tok.text.to_lowercase() } else { tok.text })
                .collect()
        })
        .filter(|s: &Vec<String>| !s.is_empty())
        .collect())
}

fn pretrain_cmd(a: &PretrainArgs, mut cfg: RunConfig, seed: u64, run: &mut Run) -> CliResult<()> {
    override_path(&a.input, &mut cfg.input);
    let w = &mut cfg.word2vec;
    if let Some(m) = &a.mode {
        w.mode = m.parse::<Word2VecMode>().invalid()?;
    }
    if let Some(x) = a.dim {
        w.dim = x;
    }
    if let Some(x) = a.window {
        w.window = x;
    }
    if let Some(x) = a.negatives {
        w.negatives = x;
    }
    if let Some(x) = a.epochs {
        w.epochs = x;
    }
    if let Some(x) = a.min_count {
        w.min_count = x;
    }
    if let Some(x) = a.lr {
        w.lr = x;
    }
    let path = require(&cfg.input, "--input").invalid()?.to_path_buf();
    run.input(&path)?;
    let corpus = read_corpus(&path, !a.keep_case)?;
    let vocab = build_vocab(corpus.iter().map(|s| s.iter().map(String::as_str)), cfg.word2vec.min_count);
    if vocab.is_empty() {
        return Err(CliError::Validation(anyhow!("corpus {} has no words", path.display())));
    }
    run.snapshot(&cfg, seed);

    let out = train_word2vec(&corpus, &vocab, &cfg.word2vec).invalid()?;
    if !out.table.all_finite() {
        return Err(CliError::Runtime(anyhow!("training produced non-finite vectors")));
    }
    let vectors = run.out_dir.join("vectors.txt");
    save_embeddings(&vectors, &out.table, &vocab).runtime()?;
    run.manifest.outputs.push("vectors.txt".into());
    run.json(
        "embeddings.json",
        &json!({
            "config": cfg.word2vec,
            "vocab_size": vocab.len(),
            "sequences": corpus.len(),
            "tokens": corpus.iter().map(Vec::len).sum::<usize>(),
            "epoch_loss": out.epoch_loss,
            "threads": 1,
            "bit_reproducible": true,
        }),
    )
}

fn apply_train_flags(a: &TrainArgs, cfg: &mut RunConfig) -> CliResult<()> {
    override_path(&a.annotations, &mut cfg.annotations);
    override_path(&a.embeddings, &mut cfg.embeddings);
    if let Some(m) = &a.mode {
        cfg.model.word_mode = m.parse::<WordEmbeddingMode>().invalid()?;
    }
    if a.no_chars {
        cfg.model.use_chars = false;
    }
    if let Some(x) = a.max_epochs {
        cfg.train.max_epochs = x;
    }
    if let Some(x) = a.patience {
        cfg.train.patience = x;
    }
    if let Some(x) = a.batch_size {
        cfg.train.batch_size = x;
    }
    if let Some(x) = a.lr {
        cfg.train.lr = x;
    }
    if let Some(x) = a.dropout {
        cfg.train.dropout = x;
    }
    Ok(())
}

fn checked_split(docs: Vec<LabeledDocument>, seed: u64) -> CliResult<dischargesum::corpus::DatasetSplit<LabeledDocument>> {
    let split = split_dataset(docs, seed).invalid()?;
    if split.dev.is_empty() || split.train.is_empty() {
        return Err(CliError::Validation(anyhow!(
            "a 70/15/15 split of {} documents leaves an empty train or dev set; need at least 7",
            split.train.len() + split.dev.len() + split.test.len()
        )));
    }
    Ok(split)
}

fn doc_ids(docs: &[LabeledDocument]) -> Vec<&str> {
    docs.iter().map(|d| d.doc_id.as_str()).collect()
}

fn train_cmd(a: &TrainArgs, mut cfg: RunConfig, seed: u64, run: &mut Run) -> CliResult<()> {
    apply_train_flags(a, &mut cfg)?;
    cfg.model.validate().invalid()?;
    cfg.train.validate().invalid()?;
    let embeddings = if cfg.model.word_mode.is_pretrained() {
        let p = require(&cfg.embeddings, "--embeddings").invalid()?.to_path_buf();
        run.input(&p)?;
        Some(p)
    } else {
        None
    };
    let docs = load_labeled(run, &cfg)?;
    let split = checked_split(docs, seed)?;
    let (model, load_stats) =
        build_model(cfg.model.clone(), &split.train, embeddings.as_deref(), seed).invalid()?;
    run.snapshot(&cfg, seed);

    let (model, history) = train(model, &cfg.train, &split.train, &split.dev).runtime()?;
    model.save(&run.out_dir.join("model.ckpt")).runtime()?;
    run.manifest.outputs.push("model.ckpt".into());
    run.json("history.json", &history)?;
    run.json(
        "split.json",
        &json!({
            "seed": seed,
            "train": doc_ids(&split.train),
            "dev": doc_ids(&split.dev),
            "test": doc_ids(&split.test),
        }),
    )?;

    let dev = evaluate(&model, &split.dev).runtime()?;
    run.output("dev_metrics.csv", dev.metrics_csv())?;
    run.output("dev_confusion.csv", dev.confusion_csv())?;
    let test = if split.test.is_empty() {
        None
    } else {
        let t = evaluate(&model, &split.test).runtime()?;
        run.output("test_metrics.csv", t.metrics_csv())?;
        run.output("test_confusion.csv", t.confusion_csv())?;
        Some(t)
    };
    run.json(
        "metrics.json",
        &json!({
            "best_epoch": history.best_epoch,
            "epochs_run": history.epochs.len(),
            "embedding_load": load_stats,
            "dev": dev,
            "test": test,
        }),
    )?;
    if let Some(reason) = &history.diverged {
        return Err(CliError::Runtime(anyhow!(
            "training diverged ({reason}); best parameters so far were saved"
        )));
    }
    Ok(())
}

fn load_checkpoint(run: &mut Run, cfg: &RunConfig) -> CliResult<TaggerModel> {
    let path = require(&cfg.checkpoint, "--checkpoint").invalid()?;
    run.input(path)?;
    TaggerModel::load(path).invalid()
}

fn evaluate_cmd(a: &EvaluateArgs, mut cfg: RunConfig, seed: u64, run: &mut Run) -> CliResult<()> {
    override_path(&a.checkpoint, &mut cfg.checkpoint);
    override_path(&a.annotations, &mut cfg.annotations);
    let model = load_checkpoint(run, &cfg)?;
    let docs = load_labeled(run, &cfg)?;
    let docs = match a.split {
        SplitChoice::All => docs,
        choice => {
            let s = split_dataset(docs, seed).invalid()?;
            match choice {
                SplitChoice::Train => s.train,
                SplitChoice::Dev => s.dev,
                _ => s.test,
            }
        }
    };
    if docs.is_empty() {
        return Err(CliError::Validation(anyhow!("the selected split is empty")));
    }
    run.snapshot(&cfg, seed);

    let report = evaluate(&model, &docs).runtime()?;
    run.output("metrics.csv", report.metrics_csv())?;
    run.output("confusion.csv", report.confusion_csv())?;
    run.json("evaluation.json", &report)
}

fn predict_cmd(a: &PredictArgs, mut cfg: RunConfig, seed: u64, run: &mut Run) -> CliResult<()> {
    override_path(&a.checkpoint, &mut cfg.checkpoint);
    override_path(&a.input, &mut cfg.input);
    let model = load_checkpoint(run, &cfg)?;
    let path = require(&cfg.input, "--input").invalid()?.to_path_buf();
    run.input(&path)?;
    let mut inputs: Vec<(String, PathBuf)> = if path.is_dir() {
        fs::read_dir(&path)
            .invalid()?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "txt"))
            .map(|p| (p.file_stem().unwrap_or_default().to_string_lossy().into_owned(), p))
            .collect()
    } else {
        let stem = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        vec![(stem, path.clone())]
    };
    inputs.sort();
    let texts = inputs
        .iter()
        .map(|(id, p)| fs::read_to_string(p).map(|t| (id.clone(), t)))
        .collect::<Result<Vec<_>, _>>()
        .invalid()?;
    run.snapshot(&cfg, seed);

    let rows = par::map(&texts, |(id, text)| -> dischargesum::Result<String> {
        let tokens = tokenize(text);
        if tokens.is_empty() {
            return Ok(String::new());
        }
        let words: Vec<&str> = tokens.iter().map(|t| t.text.as_str()).collect();
        let labels = model.predict(&words)?;
        let mut out = String::new();
        for (t, l) in tokens.iter().zip(labels) {
            out.push_str(&format!("{id}\t{}\t{}\t{}\t{}\n", t.text, t.start, t.end, l.name()));
        }
        Ok(out)
    });
    let mut out = String::new();
    for r in rows {
        out.push_str(&r.runtime()?);
    }
    run.output("predictions.tsv", out)
}

/// `name=path`, or a bare path named after its file stem.
fn parse_source(arg: &str) -> EmbeddingSource {
    match arg.split_once('=') {
        Some((name, path)) => EmbeddingSource {
            name: name.to_string(),
            path: PathBuf::from(path),
        },
        None => {
            let path = PathBuf::from(arg);
            let name = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            EmbeddingSource { name, path }
        }
    }
}

fn ablate_cmd(a: &AblateArgs, mut cfg: RunConfig, seed: u64, run: &mut Run) -> CliResult<()> {
    override_path(&a.annotations, &mut cfg.annotations);
    if !a.embeddings.is_empty() {
        cfg.ablation.sources = a.embeddings.iter().map(|s| parse_source(s)).collect();
    }
    if let Some(m) = &a.mode {
        cfg.ablation.pretrained_mode = m.parse().invalid()?;
    }
    if !cfg.ablation.pretrained_mode.is_pretrained() {
        return Err(CliError::Validation(anyhow!(
            "ablation --mode must be pretrained-frozen or pretrained-finetuned"
        )));
    }
    if let Some(x) = a.max_epochs {
        cfg.train.max_epochs = x;
    }
    cfg.model.validate().invalid()?;
    cfg.train.validate().invalid()?;
    for s in &cfg.ablation.sources {
        if s.path.is_file() {
            run.input(&s.path)?;
        }
    }
    let docs = load_labeled(run, &cfg)?;
    let split = checked_split(docs, seed)?;
    run.snapshot(&cfg, seed);

    let grid = ablation_grid(&cfg.ablation.sources, cfg.ablation.pretrained_mode);
    let rows = ablation_run(&grid, &cfg.model, &cfg.train, &split.train, &split.dev);
    let mut buf = Vec::new();
    write_ablation_csv(&mut buf, &rows).runtime()?;
    run.output("ablation.csv", buf)?;
    run.json("ablation.json", &rows)
}

#[derive(Serialize)]
struct Comparison {
    quantity: String,
    measured: Option<f64>,
    reference: f64,
}

fn read_json(path: &Path) -> CliResult<Option<serde_json::Value>> {
    if !path.is_file() {
        return Ok(None);
    }
    let text = fs::read_to_string(path).runtime()?;
    serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", path.display()))
        .invalid()
        .map(Some)
}

/// Header name used by the default header set for a reference row label.
fn canonical_section(short: &str) -> &str {
    match short {
        "HPI" => "History of Present Illness",
        "Procedure" => "Major Surgical or Invasive Procedure",
        "Discharge Medication" => "Discharge Medications",
        other => other,
    }
}

fn report_cmd(a: &ReportArgs, cfg: RunConfig, seed: u64, run: &mut Run) -> CliResult<()> {
    let dir = a.run_dir.clone().unwrap_or_else(|| run.out_dir.to_path_buf());
    if !dir.is_dir() {
        return Err(CliError::Validation(anyhow!("run directory {} does not exist", dir.display())));
    }
    run.snapshot(&cfg, seed);

    let num = |v: &Option<serde_json::Value>, ptr: &str| v.as_ref().and_then(|v| v.pointer(ptr)).and_then(|x| x.as_f64());
    let adm = read_json(&dir.join("recall_by-admission.json"))?;
    let subj = read_json(&dir.join("recall_by-subject.json"))?;
    let sections = read_json(&dir.join("section_recall.json"))?;
    let metrics = read_json(&dir.join("metrics.json"))?;
    let ablation = read_json(&dir.join("ablation.json"))?;

    let mut rows = vec![
        Comparison {
            quantity: "mean recall by admission".into(),
            measured: num(&adm, "/mean_recall"),
            reference: reference::RECALL_BY_ADMISSION,
        },
        Comparison {
            quantity: "mean recall by subject".into(),
            measured: num(&subj, "/mean_recall"),
            reference: reference::RECALL_BY_SUBJECT,
        },
    ];
    let mut section_values: BTreeMap<String, f64> = BTreeMap::new();
    if let Some(list) = sections.as_ref().and_then(|s| s.get("sections")).and_then(|s| s.as_array()) {
        for s in list {
            if let (Some(name), Some(v)) = (s["section"].as_str(), s["mean_recall"].as_f64()) {
                section_values.insert(name.to_string(), v);
            }
        }
    }
    if let Some(v) = num(&sections, "/sex/fraction") {
        section_values.insert("Sex".into(), v);
    }
    for (name, r) in reference::SECTION_RECALL {
        rows.push(Comparison {
            quantity: format!("section recall: {name}"),
            measured: section_values.get(canonical_section(name)).copied(),
            reference: r,
        });
    }
    let best_dev = num(&metrics, "/dev/weighted_f1").or_else(|| {
        ablation.as_ref().and_then(|v| v.as_array()).and_then(|rows| {
            rows.iter()
                .filter_map(|r| r["status"]["dev_weighted_f1"].as_f64())
                .fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.max(x))))
        })
    });
    rows.push(Comparison {
        quantity: "best dev weighted F1".into(),
        measured: best_dev,
        reference: reference::BEST_DEV_F1,
    });
    rows.push(Comparison {
        quantity: "test weighted F1".into(),
        measured: num(&metrics, "/test/weighted_f1"),
        reference: reference::TEST_F1,
    });
    rows.push(Comparison {
        quantity: "test accuracy".into(),
        measured: num(&metrics, "/test/accuracy"),
        reference: reference::TEST_ACCURACY,
    });

    let mut md = String::from("# Run summary\n\n");
    md.push_str(
        "Reference figures come from restricted clinical notes and are not reproducible \
         with shipped data. They are listed for orientation only.\n\n",
    );
    md.push_str("| quantity | measured | reference |\n|---|---|---|\n");
    for r in &rows {
        let m = r.measured.map_or("-".to_string(), |x| format!("{x:.4}"));
        md.push_str(&format!("| {} | {m} | {:.3} |\n", r.quantity, r.reference));
    }
    if let Some(list) = ablation.as_ref().and_then(|v| v.as_array()) {
        md.push_str("\n## Ablation (dev weighted F1)\n\n| configuration | result |\n|---|---|\n");
        for r in list {
            let name = r["config"]["name"].as_str().unwrap_or("?");
            let result = match r["status"]["dev_weighted_f1"].as_f64() {
                Some(f) => format!("{f:.4}"),
                None => r["status"]["status"].as_str().unwrap_or("?").to_string(),
            };
            md.push_str(&format!("| {name} | {result} |\n"));
        }
    }
    run.output("report.md", md)?;
    run.json("report.json", &rows)
}

pub fn describe(err: &CliError) -> String {
    match err {
        CliError::Validation(e) | CliError::Runtime(e) => format!("{e:#}"),
    }
}
