//! Vocabularies, word2vec pretraining and word2vec text-format vector files.

mod io;
mod vocab;
mod word2vec;

use serde::{Deserialize, Serialize};

use crate::nn::Matrix;

pub(crate) use io::align_vectors;
pub use io::{load_embeddings, read_vectors, save_embeddings, write_vectors, LoadStats};
pub use vocab::{build_vocab, CharVocab, Vocab, PAD, UNK};
pub use word2vec::{train_word2vec, Word2VecConfig, Word2VecMode, Word2VecOutput};

/// `|V| × d` table, row `i` holding the vector for vocabulary id `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTable {
    pub matrix: Matrix,
}

impl EmbeddingTable {
    pub fn dim(&self) -> usize {
        self.matrix.cols
    }

    pub fn len(&self) -> usize {
        self.matrix.rows
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.rows == 0
    }

    pub fn row(&self, id: usize) -> &[f64] {
        self.matrix.row(id)
    }

    pub fn all_finite(&self) -> bool {
        self.matrix.data.iter().all(|x| x.is_finite())
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}
