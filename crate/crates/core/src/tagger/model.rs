use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Label, LabeledDocument, NUM_LABELS};
use crate::crf::{self, CrfParams, EmissionScores};
use crate::embeddings::{self, build_vocab, CharVocab, EmbeddingTable, LoadStats, Vocab, PAD};
use crate::nn::{
    bilstm_backward, bilstm_forward, dropout, dropout_backward, Archive, BiLstm, BiLstmCache,
    DropoutMode, Matrix, NamedArray, Params, Scorer, ScorerCache,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WordEmbeddingMode {
    PretrainedFrozen,
    PretrainedFinetuned,
    Learned,
}

impl WordEmbeddingMode {
    pub fn is_pretrained(self) -> bool {
        self != WordEmbeddingMode::Learned
    }

    pub fn is_trainable(self) -> bool {
        self != WordEmbeddingMode::PretrainedFrozen
    }

    pub fn name(self) -> &'static str {
        match self {
            WordEmbeddingMode::PretrainedFrozen => "pretrained-frozen",
            WordEmbeddingMode::PretrainedFinetuned => "pretrained-finetuned",
            WordEmbeddingMode::Learned => "learned",
        }
    }
}

impl FromStr for WordEmbeddingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "pretrained-frozen" | "frozen" => Ok(WordEmbeddingMode::PretrainedFrozen),
            "pretrained-finetuned" | "pretrained" | "finetuned" => {
                Ok(WordEmbeddingMode::PretrainedFinetuned)
            }
            "learned" | "learned-from-scratch" => Ok(WordEmbeddingMode::Learned),
            _ => Err(Error::Config(format!("unknown word embedding mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub word_dim: usize,
    pub char_dim: usize,
    /// Per direction.
    pub char_hidden: usize,
    pub use_chars: bool,
    /// Per direction.
    pub context_hidden: usize,
    /// `None` scores labels with a single affine layer.
    pub scorer_hidden: Option<usize>,
    pub word_mode: WordEmbeddingMode,
    /// Look words up lowercased. Characters always keep their case.
    pub lowercase: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            word_dim: 100,
            char_dim: 25,
            char_hidden: 25,
            use_chars: true,
            context_hidden: 100,
            scorer_hidden: Some(64),
            word_mode: WordEmbeddingMode::Learned,
            lowercase: true,
        }
    }
}

impl ModelConfig {
    pub fn char_output_size(&self) -> usize {
        if self.use_chars {
            2 * self.char_hidden
        } else {
            0
        }
    }

    /// Length of the hybrid token vector `e = [t; c]`.
    pub fn token_dim(&self) -> usize {
        self.word_dim + self.char_output_size()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("word_dim", self.word_dim),
            ("context_hidden", self.context_hidden),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.use_chars && (self.char_dim == 0 || self.char_hidden == 0) {
            return Err(Error::Config("char_dim and char_hidden must be positive".into()));
        }
        if self.scorer_hidden == Some(0) {
            return Err(Error::Config("scorer_hidden must be positive".into()));
        }
        Ok(())
    }
}

/// Everything except the word table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub chars: Option<Matrix>,
    pub char_lstm: Option<BiLstm>,
    pub context: BiLstm,
    pub scorer: Scorer,
    pub crf: CrfParams,
}

impl NetworkParams {
    pub fn zeros_like(&self) -> Self {
        NetworkParams {
            chars: self.chars.as_ref().map(|m| Matrix::zeros(m.rows, m.cols)),
            char_lstm: self.char_lstm.as_ref().map(BiLstm::zeros_like),
            context: self.context.zeros_like(),
            scorer: self.scorer.zeros_like(),
            crf: self.crf.zeros_like(),
        }
    }
}

impl Params for NetworkParams {
    fn visit(&self, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        if let Some(m) = &self.chars {
            f("chars", &m.shape(), &m.data);
        }
        if let Some(l) = &self.char_lstm {
            l.visit(&mut |n, s, v| f(&format!("char_lstm.{n}"), s, v));
        }
        self.context.visit(&mut |n, s, v| f(&format!("context.{n}"), s, v));
        self.scorer.visit(&mut |n, s, v| f(&format!("scorer.{n}"), s, v));
        self.crf.visit(&mut |n, s, v| f(&format!("crf.{n}"), s, v));
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
        if let Some(m) = &mut self.chars {
            f("chars", &mut m.data);
        }
        if let Some(l) = &mut self.char_lstm {
            l.visit_mut(&mut |n, v| f(&format!("char_lstm.{n}"), v));
        }
        self.context.visit_mut(&mut |n, v| f(&format!("context.{n}"), v));
        self.scorer.visit_mut(&mut |n, v| f(&format!("scorer.{n}"), v));
        self.crf.visit_mut(&mut |n, v| f(&format!("crf.{n}"), v));
    }
}

/// All trainable arrays; the same type accumulates gradients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggerParams {
    pub words: Matrix,
    pub net: NetworkParams,
}

impl TaggerParams {
    pub fn zeros_like(&self) -> Self {
        TaggerParams {
            words: Matrix::zeros(self.words.rows, self.words.cols),
            net: self.net.zeros_like(),
        }
    }
}

impl Params for TaggerParams {
    fn visit(&self, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        f("words", &self.words.shape(), &self.words.data);
        self.net.visit(f);
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
        f("words", &mut self.words.data);
        self.net.visit_mut(f);
    }
}

/// Dropout applied during training. Evaluation never drops.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DropoutConfig {
    pub rate: f64,
    /// Drop entries of the hybrid token vectors.
    pub embeddings: bool,
    /// Drop entries of the contextual states.
    pub hidden: bool,
}

impl DropoutConfig {
    pub const NONE: DropoutConfig = DropoutConfig {
        rate: 0.0,
        embeddings: false,
        hidden: false,
    };
}

/// Token ids for one document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedDoc {
    pub words: Vec<usize>,
    pub chars: Vec<Vec<usize>>,
}

impl EncodedDoc {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

pub(crate) struct ForwardCache {
    char_caches: Vec<Option<BiLstmCache>>,
    e_masks: Vec<Vec<f64>>,
    context: BiLstmCache,
    h_masks: Vec<Vec<f64>>,
    scorer: Vec<ScorerCache>,
}

/// Loss and gradients for one document. Word-table gradients are kept as
/// `(row, gradient)` pairs so a full table is never allocated per document.
#[derive(Debug, Clone)]
pub struct DocGradient {
    pub loss: f64,
    pub word_rows: Vec<(usize, Vec<f64>)>,
    pub net: NetworkParams,
}

impl DocGradient {
    pub fn accumulate_into(&self, total: &mut TaggerParams) {
        for (row, g) in &self.word_rows {
            for (a, b) in total.words.row_mut(*row).iter_mut().zip(g) {
                *a += b;
            }
        }
        total.net.add_scaled(&self.net, 1.0);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggerModel {
    pub config: ModelConfig,
    pub vocab: Vocab,
    pub char_vocab: CharVocab,
    pub params: TaggerParams,
}

#[derive(Serialize, Deserialize)]
struct CheckpointMeta {
    kind: String,
    config: ModelConfig,
    vocab: Vocab,
    char_vocab: CharVocab,
    labels: Vec<String>,
}

const CHECKPOINT_KIND: &str = "bilstm-crf-tagger";

fn random_table<R: Rng>(rows: usize, dim: usize, rng: &mut R) -> Matrix {
    let bound = (3.0 / dim as f64).sqrt();
    let mut m = Matrix::from_vec(
        rows,
        dim,
        (0..rows * dim).map(|_| rng.gen_range(-bound..=bound)).collect(),
    );
    m.row_mut(PAD).fill(0.0);
    m
}

impl TaggerModel {
    /// Randomly initialized model. Embedding rows are uniform in
    /// `±sqrt(3/d)` with the PAD row zeroed.
    pub fn new<R: Rng>(config: ModelConfig, vocab: Vocab, char_vocab: CharVocab, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let words = random_table(vocab.len(), config.word_dim, rng);
        let (chars, char_lstm) = if config.use_chars {
            let table = random_table(char_vocab.len(), config.char_dim, rng);
            (Some(table), Some(BiLstm::new(config.char_dim, config.char_hidden, rng)))
        } else {
            (None, None)
        };
        let context = BiLstm::new(config.token_dim(), config.context_hidden, rng);
        let scorer = Scorer::new(2 * config.context_hidden, config.scorer_hidden, NUM_LABELS, rng);
        Ok(TaggerModel {
            config,
            vocab,
            char_vocab,
            params: TaggerParams {
                words,
                net: NetworkParams {
                    chars,
                    char_lstm,
                    context,
                    scorer,
                    crf: CrfParams::zeros(NUM_LABELS),
                },
            },
        })
    }

    /// Replaces the word table. The table must be aligned to `self.vocab`.
    pub fn set_word_table(&mut self, table: &EmbeddingTable) -> Result<()> {
        if table.matrix.shape() != self.params.words.shape() {
            return Err(Error::Shape(format!(
                "word table is {:?}, model expects {:?}",
                table.matrix.shape(),
                self.params.words.shape()
            )));
        }
        self.params.words = table.matrix.clone();
        Ok(())
    }

    /// Same architecture with every parameter zero.
    pub fn zeroed(&self) -> Self {
        TaggerModel {
            params: self.params.zeros_like(),
            ..self.clone()
        }
    }

    pub fn word_key(&self, word: &str) -> String {
        if self.config.lowercase {
            word.to_lowercase()
        } else {
            word.to_string()
        }
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> EncodedDoc {
        let words = tokens.iter().map(|t| self.vocab.id(&self.word_key(t.as_ref()))).collect();
        let chars = tokens
            .iter()
            .map(|t| t.as_ref().chars().map(|c| self.char_vocab.id(c)).collect())
            .collect();
        EncodedDoc { words, chars }
    }

    pub fn encode_document(&self, doc: &LabeledDocument) -> EncodedDoc {
        let words: Vec<&str> = doc.words().collect();
        self.encode(&words)
    }

    fn char_vector(&self, chars: &[usize]) -> (Vec<f64>, Option<BiLstmCache>) {
        let (Some(table), Some(lstm)) = (&self.params.net.chars, &self.params.net.char_lstm) else {
            return (Vec::new(), None);
        };
        let hc = self.config.char_hidden;
        if chars.is_empty() {
            return (vec![0.0; 2 * hc], None);
        }
        let inputs: Vec<Vec<f64>> = chars.iter().map(|&c| table.row(c).to_vec()).collect();
        let (out, cache) = bilstm_forward(&lstm.fwd, &lstm.bwd, &inputs);
        let mut c = out[out.len() - 1][..hc].to_vec();
        c.extend_from_slice(&out[0][hc..]);
        (c, Some(cache))
    }

    /// Hybrid vectors `e_i = [t_i; c_i]`, where `c_i` joins the final forward
    /// and final backward states of the character BiLSTM.
    pub fn embed_tokens(&self, doc: &EncodedDoc) -> Vec<Vec<f64>> {
        doc.words
            .iter()
            .zip(&doc.chars)
            .map(|(&w, chars)| {
                let mut e = self.params.words.row(w).to_vec();
                e.extend(self.char_vector(chars).0);
                e
            })
            .collect()
    }

    pub(crate) fn forward_cached<R: Rng>(
        &self,
        doc: &EncodedDoc,
        drop: DropoutConfig,
        mode: DropoutMode,
        rng: &mut R,
    ) -> Result<(EmissionScores, ForwardCache)> {
        if doc.is_empty() {
            return Err(Error::EmptyDocument);
        }
        let net = &self.params.net;
        let mut char_caches = Vec::with_capacity(doc.len());
        let mut e_masks = Vec::with_capacity(doc.len());
        let mut es = Vec::with_capacity(doc.len());
        for (&w, chars) in doc.words.iter().zip(&doc.chars) {
            let mut e = self.params.words.row(w).to_vec();
            let (c, cache) = self.char_vector(chars);
            e.extend(c);
            char_caches.push(cache);
            let rate = if drop.embeddings { drop.rate } else { 0.0 };
            let (e, mask) = dropout(&e, rate, mode, rng);
            es.push(e);
            e_masks.push(mask);
        }

        let (hs, context) = bilstm_forward(&net.context.fwd, &net.context.bwd, &es);
        let mut emissions = Matrix::zeros(doc.len(), NUM_LABELS);
        let mut h_masks = Vec::with_capacity(doc.len());
        let mut scorer = Vec::with_capacity(doc.len());
        for (j, h) in hs.iter().enumerate() {
            let rate = if drop.hidden { drop.rate } else { 0.0 };
            let (h, mask) = dropout(h, rate, mode, rng);
            let (s, cache) = net.scorer.forward(&h);
            emissions.row_mut(j).copy_from_slice(&s);
            h_masks.push(mask);
            scorer.push(cache);
        }
        Ok((
            emissions,
            ForwardCache {
                char_caches,
                e_masks,
                context,
                h_masks,
                scorer,
            },
        ))
    }

    /// Eval-mode emission scores, `m × 10`.
    pub fn forward(&self, doc: &EncodedDoc) -> Result<EmissionScores> {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        Ok(self.forward_cached(doc, DropoutConfig::NONE, DropoutMode::Eval, &mut rng)?.0)
    }

    pub(crate) fn backward(
        &self,
        doc: &EncodedDoc,
        cache: &ForwardCache,
        d_emissions: &Matrix,
        word_rows: &mut Vec<(usize, Vec<f64>)>,
        grads: &mut NetworkParams,
    ) {
        let net = &self.params.net;
        let dh: Vec<Vec<f64>> = (0..doc.len())
            .map(|j| {
                let d = net.scorer.backward(&cache.scorer[j], d_emissions.row(j), &mut grads.scorer);
                dropout_backward(&d, &cache.h_masks[j])
            })
            .collect();
        let de = bilstm_backward(
            &net.context.fwd,
            &net.context.bwd,
            &cache.context,
            &dh,
            &mut grads.context.fwd,
            &mut grads.context.bwd,
        );

        let wd = self.config.word_dim;
        let hc = self.config.char_hidden;
        for (j, de) in de.iter().enumerate() {
            let de = dropout_backward(de, &cache.e_masks[j]);
            if self.config.word_mode.is_trainable() {
                word_rows.push((doc.words[j], de[..wd].to_vec()));
            }
            let (Some(lstm), Some(char_cache), Some(g_lstm), Some(g_chars)) = (
                &net.char_lstm,
                &cache.char_caches[j],
                &mut grads.char_lstm,
                &mut grads.chars,
            ) else {
                continue;
            };
            let dc = &de[wd..];
            let n = doc.chars[j].len();
            let mut d_out = vec![vec![0.0; 2 * hc]; n];
            d_out[n - 1][..hc].copy_from_slice(&dc[..hc]);
            for (a, b) in d_out[0][hc..].iter_mut().zip(&dc[hc..]) {
                *a += b;
            }
            let d_chars = bilstm_backward(&lstm.fwd, &lstm.bwd, char_cache, &d_out, &mut g_lstm.fwd, &mut g_lstm.bwd);
            for (&c, d) in doc.chars[j].iter().zip(&d_chars) {
                for (a, b) in g_chars.row_mut(c).iter_mut().zip(d) {
                    *a += b;
                }
            }
        }
    }

    /// CRF negative log-likelihood of `labels` (label ids) and its gradient.
    /// With a rate above zero, dropout masks are drawn from `rng`.
    pub fn loss_and_gradient<R: Rng>(
        &self,
        doc: &EncodedDoc,
        labels: &[usize],
        drop: DropoutConfig,
        rng: &mut R,
    ) -> Result<DocGradient> {
        let (s, cache) = self.forward_cached(doc, drop, DropoutMode::Train, rng)?;
        let nll = crf::sequence_nll(&self.params.net.crf, &s, labels)?;
        let mut net = self.params.net.zeros_like();
        net.crf = nll.grads;
        let mut word_rows = Vec::new();
        self.backward(doc, &cache, &nll.d_emissions, &mut word_rows, &mut net);
        Ok(DocGradient {
            loss: nll.loss,
            word_rows,
            net,
        })
    }

    /// Loss only, drawing dropout masks exactly as [`Self::loss_and_gradient`].
    pub fn loss<R: Rng>(&self, doc: &EncodedDoc, labels: &[usize], drop: DropoutConfig, rng: &mut R) -> Result<f64> {
        let (s, _) = self.forward_cached(doc, drop, DropoutMode::Train, rng)?;
        Ok(crf::sequence_nll(&self.params.net.crf, &s, labels)?.loss)
    }

    /// Viterbi labels. An empty document gives an empty labeling.
    pub fn predict_encoded(&self, doc: &EncodedDoc) -> Result<Vec<Label>> {
        if doc.is_empty() {
            return Ok(Vec::new());
        }
        let s = self.forward(doc)?;
        let (path, _) = crf::viterbi(&self.params.net.crf, &s)?;
        Ok(path.into_iter().map(|id| Label::ALL[id]).collect())
    }

    pub fn predict<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Vec<Label>> {
        self.predict_encoded(&self.encode(tokens))
    }

    pub fn to_archive(&self) -> Archive {
        let meta = CheckpointMeta {
            kind: CHECKPOINT_KIND.to_string(),
            config: self.config.clone(),
            vocab: self.vocab.clone(),
            char_vocab: self.char_vocab.clone(),
            labels: Label::ALL.iter().map(|l| l.name().to_string()).collect(),
        };
        let metadata = serde_json::to_string(&meta).expect("metadata serializes");
        Archive::new(metadata, self.params.to_arrays())
    }

    pub fn from_archive(archive: &Archive) -> Result<Self> {
        let meta: CheckpointMeta = serde_json::from_str(&archive.metadata)
            .map_err(|e| Error::Checkpoint(format!("bad metadata: {e}")))?;
        if meta.kind != CHECKPOINT_KIND {
            return Err(Error::Checkpoint(format!("not a tagger checkpoint: {}", meta.kind)));
        }
        let labels: Vec<&str> = Label::ALL.iter().map(|l| l.name()).collect();
        if meta.labels != labels {
            return Err(Error::Checkpoint("label inventory differs".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut model = TaggerModel::new(meta.config, meta.vocab, meta.char_vocab, &mut rng)?;
        let mut expected = Vec::new();
        model.params.visit(&mut |n, s, _| expected.push((n.to_string(), s.to_vec())));
        if expected.len() != archive.arrays.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} arrays, found {}",
                expected.len(),
                archive.arrays.len()
            )));
        }
        for ((name, shape), a) in expected.iter().zip(&archive.arrays) {
            if &a.name != name || &a.shape != shape {
                return Err(Error::Checkpoint(format!(
                    "array {} {:?} does not match expected {name} {shape:?}",
                    a.name, a.shape
                )));
            }
        }
        let mut k = 0;
        model.params.visit_mut(&mut |_, v| {
            v.copy_from_slice(&archive.arrays[k].data);
            k += 1;
        });
        if !model.params.all_finite() {
            return Err(Error::Checkpoint("non-finite parameter".into()));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_archive().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_archive(&Archive::load(path)?)
    }

    pub fn arrays(&self) -> Vec<NamedArray> {
        self.params.to_arrays()
    }
}

/// Builds the vocabularies from training documents and initializes a model.
/// In pretrained modes, `embeddings` must name a vector file; its words are
/// added to the vocabulary after the training words, `word_dim` is taken
/// from the file, and rows the file lacks get the loader's random init.
pub fn build_model(
    mut config: ModelConfig,
    train: &[LabeledDocument],
    embeddings: Option<&Path>,
    seed: u64,
) -> Result<(TaggerModel, Option<LoadStats>)> {
    let key = |w: &str| if config.lowercase { w.to_lowercase() } else { w.to_string() };
    let corpus: Vec<Vec<String>> = train.iter().map(|d| d.words().map(key).collect()).collect();
    let char_vocab = CharVocab::new(train.iter().flat_map(|d| d.words()));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    if !config.word_mode.is_pretrained() {
        let vocab = build_vocab(corpus.iter().map(|s| s.iter().map(String::as_str)), 1);
        return Ok((TaggerModel::new(config, vocab, char_vocab, &mut rng)?, None));
    }
    let path = embeddings.ok_or_else(|| {
        Error::Config(format!("word mode {} needs an embedding file", config.word_mode.name()))
    })?;
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let (dim, entries) = embeddings::read_vectors(std::io::BufReader::new(file))?;
    let base = build_vocab(corpus.iter().map(|s| s.iter().map(String::as_str)), 1);
    let mut words: Vec<String> = base.words()[2..].to_vec();
    for (w, _) in &entries {
        if base.get(w).is_none() {
            words.push(w.clone());
        }
    }
    let mut seen = std::collections::HashSet::new();
    words.retain(|w| seen.insert(w.clone()));
    let vocab = Vocab::from_words(words);
    config.word_dim = dim;
    let (table, stats) = embeddings::align_vectors(dim, entries, &vocab, seed);
    let mut model = TaggerModel::new(config, vocab, char_vocab, &mut rng)?;
    model.set_word_table(&table)?;
    Ok((model, Some(stats)))
}
