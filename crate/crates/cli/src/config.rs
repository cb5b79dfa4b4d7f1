//! Run configuration: an optional TOML or JSON file, overridden by flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use dischargesum::embeddings::Word2VecConfig;
use dischargesum::tagger::{EmbeddingSource, ModelConfig, TrainConfig, WordEmbeddingMode};
use serde::{Deserialize, Serialize};

pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    /// Notes file (CSV or JSON lines).
    pub notes: Option<PathBuf>,
    /// Directory of `.xml`/`.txt` pairs, or JSON lines of labeled documents.
    pub annotations: Option<PathBuf>,
    pub gazetteer: Option<PathBuf>,
    pub headers: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    /// Tagger checkpoint read by `evaluate` and `predict`.
    pub checkpoint: Option<PathBuf>,
    /// Plain-text input for `predict`, or the corpus for `pretrain-embeddings`.
    pub input: Option<PathBuf>,
    pub structured_sex: Option<PathBuf>,
    pub recall: RecallSection,
    pub word2vec: Word2VecConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub ablation: AblationSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecallSection {
    /// `by-admission` or `by-subject`.
    pub mode: Option<String>,
    pub sections: Vec<String>,
    pub scatter: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationSection {
    pub sources: Vec<EmbeddingSource>,
    pub pretrained_mode: WordEmbeddingMode,
}

impl Default for AblationSection {
    fn default() -> Self {
        AblationSection {
            sources: Vec::new(),
            pretrained_mode: WordEmbeddingMode::PretrainedFinetuned,
        }
    }
}

impl RunConfig {
    /// Reads a `.json` file as JSON and anything else as TOML. Relative
    /// paths inside the file resolve against the file's directory.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: RunConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        } else {
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        };
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(path) = p {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        fix(&mut self.notes);
        fix(&mut self.annotations);
        fix(&mut self.gazetteer);
        fix(&mut self.headers);
        fix(&mut self.embeddings);
        fix(&mut self.checkpoint);
        fix(&mut self.input);
        fix(&mut self.structured_sex);
        for s in &mut self.ablation.sources {
            if s.path.is_relative() {
                s.path = base.join(&s.path);
            }
        }
    }

    /// Applies the effective seed everywhere a seed is consumed.
    pub fn apply_seed(&mut self, flag: Option<u64>) -> u64 {
        let seed = flag.or(self.seed).unwrap_or(DEFAULT_SEED);
        self.seed = Some(seed);
        self.train.seed = seed;
        self.word2vec.seed = seed;
        seed
    }
}

/// Returns the path or a validation message naming the missing flag.
pub fn require<'a>(value: &'a Option<PathBuf>, flag: &str) -> anyhow::Result<&'a Path> {
    match value {
        Some(p) => Ok(p),
        None => bail!("missing required input: pass {flag} or set it in the config file"),
    }
}
