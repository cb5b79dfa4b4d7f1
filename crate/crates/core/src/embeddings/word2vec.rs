use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{EmbeddingTable, Vocab, PAD, UNK};
use crate::nn::{sigmoid, Matrix};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Word2VecMode {
    Cbow,
    Skipgram,
}

impl std::str::FromStr for Word2VecMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "cbow" => Ok(Word2VecMode::Cbow),
            "skipgram" | "sg" => Ok(Word2VecMode::Skipgram),
            _ => Err(Error::Config(format!("unknown word2vec mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Word2VecConfig {
    pub mode: Word2VecMode,
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Starting learning rate; decays linearly to `1e-4` of itself.
    pub lr: f64,
    pub min_count: usize,
}

impl Default for Word2VecConfig {
    fn default() -> Self {
        Word2VecConfig {
            mode: Word2VecMode::Cbow,
            dim: 100,
            window: 5,
            negatives: 5,
            epochs: 5,
            seed: 1,
            lr: 0.025,
            min_count: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Word2VecOutput {
    pub table: EmbeddingTable,
    /// Mean negative-sampling loss per training example, one entry per epoch.
    pub epoch_loss: Vec<f64>,
}

/// Cumulative unigram^0.75 distribution for negative sampling.
struct NoiseTable {
    cumulative: Vec<f64>,
}

impl NoiseTable {
    fn new(counts: &[usize]) -> Self {
        let mut acc = 0.0;
        let cumulative = counts
            .iter()
            .map(|&c| {
                acc += (c as f64).powf(0.75);
                acc
            })
            .collect();
        NoiseTable { cumulative }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let total = *self.cumulative.last().unwrap();
        let u = rng.gen::<f64>() * total;
        self.cumulative.partition_point(|&c| c <= u).min(self.cumulative.len() - 1)
    }
}

/// One positive and `negatives` negative logistic updates of `input` against
/// output vectors. Adds the input gradient step into `neu1e` and returns the
/// loss before the update.
#[allow(clippy::too_many_arguments)]
fn negative_sampling_update<R: Rng>(
    input: &[f64],
    target: usize,
    outputs: &mut Matrix,
    noise: &NoiseTable,
    negatives: usize,
    lr: f64,
    neu1e: &mut [f64],
    rng: &mut R,
) -> f64 {
    let mut loss = 0.0;
    for k in 0..=negatives {
        let (word, label) = if k == 0 {
            (target, 1.0)
        } else {
            let w = noise.sample(rng);
            if w == target {
                continue;
            }
            (w, 0.0)
        };
        let out = outputs.row_mut(word);
        let score: f64 = input.iter().zip(out.iter()).map(|(a, b)| a * b).sum();
        let p = sigmoid(score);
        loss -= if label == 1.0 { p.max(1e-12).ln() } else { (1.0 - p).max(1e-12).ln() };
        let g = (label - p) * lr;
        for (e, o) in neu1e.iter_mut().zip(out.iter()) {
            *e += g * o;
        }
        for (o, i) in out.iter_mut().zip(input) {
            *o += g * i;
        }
    }
    loss
}

/// Trains word vectors with negative sampling. Tokens missing from `vocab`
/// are dropped before windows are formed. Single-threaded and seeded, so the
/// result is bit-reproducible.
pub fn train_word2vec(
    corpus: &[Vec<String>],
    vocab: &Vocab,
    cfg: &Word2VecConfig,
) -> Result<Word2VecOutput> {
    if cfg.dim < 2 {
        return Err(Error::Config("word2vec dim must be at least 2".into()));
    }
    if cfg.window < 1 {
        return Err(Error::Config("word2vec window must be at least 1".into()));
    }
    let sentences: Vec<Vec<usize>> = corpus
        .iter()
        .map(|s| s.iter().filter_map(|w| vocab.get(w)).filter(|&id| id > UNK).collect())
        .collect();
    let n_tokens: usize = sentences.iter().map(Vec::len).sum();
    if n_tokens < cfg.window + 1 {
        return Err(Error::CorpusTooShort {
            tokens: n_tokens,
            window: cfg.window,
        });
    }

    let mut counts = vec![0usize; vocab.len()];
    for &id in sentences.iter().flatten() {
        counts[id] += 1;
    }
    let noise = NoiseTable::new(&counts);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let d = cfg.dim;
    let bound = 0.5 / d as f64;
    let mut inputs = Matrix::from_vec(
        vocab.len(),
        d,
        (0..vocab.len() * d).map(|_| rng.gen_range(-bound..=bound)).collect(),
    );
    inputs.row_mut(PAD).fill(0.0);
    let mut outputs = Matrix::zeros(vocab.len(), d);

    let total_steps = (n_tokens * cfg.epochs).max(1) as f64;
    let mut processed = 0usize;
    let mut epoch_loss = Vec::with_capacity(cfg.epochs);
    let mut neu1 = vec![0.0; d];
    let mut neu1e = vec![0.0; d];

    for _ in 0..cfg.epochs {
        let mut loss_sum = 0.0;
        let mut examples = 0usize;
        for sent in &sentences {
            for (pos, &center) in sent.iter().enumerate() {
                let lr = (cfg.lr * (1.0 - processed as f64 / total_steps)).max(cfg.lr * 1e-4);
                processed += 1;
                // word2vec-style random window shrink
                let reach = cfg.window - rng.gen_range(0..cfg.window);
                let lo = pos.saturating_sub(reach);
                let hi = (pos + reach).min(sent.len() - 1);
                let context: Vec<usize> = (lo..=hi).filter(|&j| j != pos).map(|j| sent[j]).collect();
                if context.is_empty() {
                    continue;
                }
                match cfg.mode {
                    Word2VecMode::Cbow => {
                        neu1.fill(0.0);
                        for &c in &context {
                            for (a, b) in neu1.iter_mut().zip(inputs.row(c)) {
                                *a += b;
                            }
                        }
                        let n = context.len() as f64;
                        neu1.iter_mut().for_each(|a| *a /= n);
                        neu1e.fill(0.0);
                        loss_sum += negative_sampling_update(
                            &neu1, center, &mut outputs, &noise, cfg.negatives, lr, &mut neu1e, &mut rng,
                        );
                        examples += 1;
                        for &c in &context {
                            for (a, e) in inputs.row_mut(c).iter_mut().zip(&neu1e) {
                                *a += e;
                            }
                        }
                    }
                    Word2VecMode::Skipgram => {
                        for &c in &context {
                            neu1e.fill(0.0);
                            let input = inputs.row(center).to_vec();
                            loss_sum += negative_sampling_update(
                                &input, c, &mut outputs, &noise, cfg.negatives, lr, &mut neu1e, &mut rng,
                            );
                            examples += 1;
                            for (a, e) in inputs.row_mut(center).iter_mut().zip(&neu1e) {
                                *a += e;
                            }
                        }
                    }
                }
            }
        }
        epoch_loss.push(if examples > 0 { loss_sum / examples as f64 } else { 0.0 });
    }

    Ok(Word2VecOutput {
        table: EmbeddingTable { matrix: inputs },
        epoch_loss,
    })
}
