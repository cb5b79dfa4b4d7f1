use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dischargesum::tagger::synthetic::separable_corpus;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_dischargesum"));
    c.env_remove("DISCHARGESUM_OUT_DIR");
    c
}

fn data(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/data").join(rel)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn manifest(dir: &Path, command: &str) -> serde_json::Value {
    let text = fs::read_to_string(dir.join(format!("{command}.manifest.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn write_corpus(dir: &Path) -> PathBuf {
    let docs = separable_corpus(40, 3, 5);
    let path = dir.join("docs.jsonl");
    let lines: Vec<String> = docs.iter().map(|d| serde_json::to_string(d).unwrap()).collect();
    fs::write(&path, lines.join("\n") + "\n").unwrap();
    path
}

fn write_config(dir: &Path) -> PathBuf {
    let path = dir.join("c.toml");
    fs::write(
        &path,
        "seed = 3\nannotations = \"docs.jsonl\"\n\
         [model]\nword_dim = 8\nchar_dim = 4\nchar_hidden = 4\ncontext_hidden = 8\nscorer_hidden = 8\n\
         [train]\nmax_epochs = 2\npatience = 1\nbatch_size = 8\nlr = 0.01\n",
    )
    .unwrap();
    path
}

#[test]
fn recall_by_admission_matches_fixture() {
    let out = tempfile::tempdir().unwrap();
    let o = run(&[
        "recall",
        "--mode",
        "by-admission",
        "--notes",
        data("fixtures/three_patients.csv").to_str().unwrap(),
        "--gazetteer",
        data("gazetteer_sample.tsv").to_str().unwrap(),
        "--out-dir",
        out.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.path().join("recall_by-admission.csv")).unwrap();
    let recalls: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(3).unwrap().parse().unwrap())
        .collect();
    assert_eq!(recalls, vec![1.0, 0.5, 0.25]);

    let agg: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.path().join("recall_by-admission.json")).unwrap()).unwrap();
    assert!((agg["mean_recall"].as_f64().unwrap() - 7.0 / 12.0).abs() < 1e-12);

    let m = manifest(out.path(), "recall");
    assert_eq!(m["status"], "ok");
    assert_eq!(m["inputs"].as_array().unwrap().len(), 2);
    assert!(m["finished_at"].is_string());
}

#[test]
fn recall_by_subject_and_rerun_is_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let o = run(&[
            "recall",
            "--mode",
            "by-subject",
            "--notes",
            data("fixtures/three_patients.csv").to_str().unwrap(),
            "--gazetteer",
            data("gazetteer_sample.tsv").to_str().unwrap(),
            "--out-dir",
            dir.path().to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0);
    }
    let read = |d: &Path| fs::read(d.join("recall_by-subject.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
    let text = String::from_utf8(read(a.path())).unwrap();
    assert!(text.contains("n1,101,1001,1,") && text.contains(",0.75,") && text.contains(",0.25,"));
}

#[test]
fn train_twice_gives_identical_metrics() {
    let work = tempfile::tempdir().unwrap();
    write_corpus(work.path());
    let config = write_config(work.path());
    let mut metrics = Vec::new();
    for run_name in ["a", "b"] {
        let out = work.path().join(run_name);
        let o = run(&["train", "--config", config.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        metrics.push(fs::read(out.join("metrics.json")).unwrap());
        assert!(out.join("model.ckpt").is_file());
        assert!(out.join("dev_confusion.csv").is_file());
        let m = manifest(&out, "train");
        assert_eq!(m["seed"], 3);
        assert_eq!(m["config"]["train"]["max_epochs"], 2);
    }
    assert_eq!(metrics[0], metrics[1]);
    assert_eq!(
        fs::read(work.path().join("a/model.ckpt")).unwrap(),
        fs::read(work.path().join("b/model.ckpt")).unwrap()
    );
    assert_eq!(
        fs::read(work.path().join("a/history.json")).unwrap(),
        fs::read(work.path().join("b/history.json")).unwrap()
    );

    // flags win over the config file
    let out = work.path().join("c");
    let o = run(&[
        "train",
        "--config",
        config.to_str().unwrap(),
        "--max-epochs",
        "3",
        "--seed",
        "11",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let m = manifest(&out, "train");
    assert_eq!(m["config"]["train"]["max_epochs"], 3);
    assert_eq!(m["seed"], 11);

    // evaluate and predict with the saved checkpoint
    let ckpt = work.path().join("a/model.ckpt");
    let eval_dir = work.path().join("eval");
    let o = run(&[
        "evaluate",
        "--config",
        config.to_str().unwrap(),
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--split",
        "test",
        "--out-dir",
        eval_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let ev: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(eval_dir.join("evaluation.json")).unwrap()).unwrap();
    let tr: serde_json::Value = serde_json::from_slice(&metrics[0]).unwrap();
    assert_eq!(ev["weighted_f1"], tr["test"]["weighted_f1"]);

    let text = work.path().join("note.txt");
    fs::write(&text, "ba be bi bo").unwrap();
    let pred_dir = work.path().join("pred");
    let o = run(&[
        "predict",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--input",
        text.to_str().unwrap(),
        "--out-dir",
        pred_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let tsv = fs::read_to_string(pred_dir.join("predictions.tsv")).unwrap();
    assert_eq!(tsv.lines().count(), 4);
    assert!(tsv.starts_with("note\tba\t0\t2\t"));
}

#[test]
fn predict_on_empty_input_writes_empty_output() {
    let work = tempfile::tempdir().unwrap();
    write_corpus(work.path());
    let config = write_config(work.path());
    let train_dir = work.path().join("t");
    let o = run(&[
        "train",
        "--config",
        config.to_str().unwrap(),
        "--out-dir",
        train_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);

    let empty = work.path().join("empty.txt");
    fs::write(&empty, "").unwrap();
    let out = work.path().join("p");
    let o = run(&[
        "predict",
        "--checkpoint",
        train_dir.join("model.ckpt").to_str().unwrap(),
        "--input",
        empty.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read(out.join("predictions.tsv")).unwrap(), Vec::<u8>::new());
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let o = run(&["recall", "--no-such-flag"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn validation_errors_exit_one() {
    let out = tempfile::tempdir().unwrap();
    let o = run(&["recall", "--notes", "/nonexistent.csv", "--out-dir", out.path().to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let m = manifest(out.path(), "recall");
    assert_eq!(m["status"], "validation-error");
    assert!(m["finished_at"].is_string());

    let o = run(&["train", "--mode", "pretrained-frozen", "--out-dir", out.path().to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("--embeddings"));

    let bad = out.path().join("bad.toml");
    fs::write(&bad, "[train]\nlr = \"fast\"\n").unwrap();
    let o = run(&["train", "--config", bad.to_str().unwrap(), "--out-dir", out.path().to_str().unwrap()]);
    assert_eq!(code(&o), 1);
}

#[test]
fn out_dir_comes_from_env() {
    let out = tempfile::tempdir().unwrap();
    let o = bin()
        .args([
            "extract-cuis",
            "--notes",
            data("fixtures/three_patients.csv").to_str().unwrap(),
            "--gazetteer",
            data("gazetteer_sample.tsv").to_str().unwrap(),
        ])
        .env("DISCHARGESUM_OUT_DIR", out.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let sets = fs::read_to_string(out.path().join("cui_sets.csv")).unwrap();
    assert!(sets.starts_with("note_id,subject_id,hadm_id,category,n_cuis,cuis\n"));
    assert_eq!(sets.lines().count(), 8);
}

#[test]
fn pretrain_then_ablate_and_report() {
    let work = tempfile::tempdir().unwrap();
    let docs_path = write_corpus(work.path());
    let docs = separable_corpus(40, 3, 5);
    let corpus = work.path().join("corpus.txt");
    let lines: Vec<String> = docs.iter().map(|d| d.words().collect::<Vec<_>>().join(" ")).collect();
    fs::write(&corpus, lines.join("\n")).unwrap();

    let emb = work.path().join("emb");
    let o = run(&[
        "pretrain-embeddings",
        "--input",
        corpus.to_str().unwrap(),
        "--mode",
        "skipgram",
        "--dim",
        "8",
        "--epochs",
        "2",
        "--out-dir",
        emb.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let header = fs::read_to_string(emb.join("vectors.txt")).unwrap();
    assert!(header.lines().next().unwrap().ends_with(" 8"));

    let out = work.path().join("ablate");
    let o = run(&[
        "ablate",
        "--config",
        write_config(work.path()).to_str().unwrap(),
        "--annotations",
        docs_path.to_str().unwrap(),
        "--embeddings",
        &format!("sg={}", emb.join("vectors.txt").display()),
        "--embeddings",
        "missing=/nonexistent/vectors.txt",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("ablation.csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);
    assert!(csv.contains("skipped"));

    let o = run(&["report", "--out-dir", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let report = fs::read_to_string(out.join("report.md")).unwrap();
    assert!(report.contains("not reproducible"));
    assert!(report.contains("sg-chars"));
}

#[test]
fn unwritable_out_dir_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("not-a-dir");
    fs::write(&file, "x").unwrap();
    let o = run(&["report", "--out-dir", file.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}
