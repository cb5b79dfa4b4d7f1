use std::io::{BufRead, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EmbeddingTable, Vocab, PAD};
use crate::nn::Matrix;
use crate::{Error, Result};

/// Outcome of aligning a vector file to a vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize)]
pub struct LoadStats {
    /// Vocabulary rows (excluding PAD) with no vector in the file.
    pub oov_rows: usize,
    /// File entries whose word is not in the vocabulary.
    pub skipped_words: usize,
}

/// Parses word2vec text format: a `count dim` header line, then one
/// `word v1 ... vd` line per entry.
pub fn read_vectors<R: BufRead>(reader: R) -> Result<(usize, Vec<(String, Vec<f64>)>)> {
    let mut lines = reader.lines().enumerate();
    let bad = |line: usize, reason: String| Error::VectorFormat { line, reason };

    let (_, header) = lines.next().ok_or_else(|| bad(1, "missing header".into()))?;
    let header = header.map_err(|e| bad(1, e.to_string()))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    let dim: usize = match parts.as_slice() {
        [_count, dim] => dim.parse().map_err(|_| bad(1, format!("bad dimension {dim:?}")))?,
        _ => return Err(bad(1, "header must be \"count dim\"".into())),
    };

    let mut entries = Vec::new();
    for (i, line) in lines {
        let lineno = i + 1;
        let line = line.map_err(|e| bad(lineno, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let word = fields.next().unwrap().to_string();
        let values = fields
            .map(|f| f.parse::<f64>().map_err(|_| bad(lineno, format!("bad value {f:?}"))))
            .collect::<Result<Vec<_>>>()?;
        if values.len() != dim {
            return Err(bad(lineno, format!("expected {dim} values, found {}", values.len())));
        }
        entries.push((word, values));
    }
    Ok((dim, entries))
}

/// Builds a table aligned to `vocab` from a vector file. Rows the file does
/// not cover are drawn uniformly from `[-0.5/d, 0.5/d]` with `seed`; PAD is 0.
pub fn load_embeddings(path: &Path, vocab: &Vocab, seed: u64) -> Result<(EmbeddingTable, LoadStats)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let (dim, entries) = read_vectors(std::io::BufReader::new(file))?;
    Ok(align_vectors(dim, entries, vocab, seed))
}

pub(crate) fn align_vectors(
    dim: usize,
    entries: Vec<(String, Vec<f64>)>,
    vocab: &Vocab,
    seed: u64,
) -> (EmbeddingTable, LoadStats) {
    let mut matrix = Matrix::zeros(vocab.len(), dim);
    let mut covered = vec![false; vocab.len()];
    covered[PAD] = true;
    let mut stats = LoadStats::default();
    for (word, values) in entries {
        match vocab.get(&word) {
            Some(id) => {
                matrix.row_mut(id).copy_from_slice(&values);
                covered[id] = true;
            }
            None => stats.skipped_words += 1,
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bound = 0.5 / dim as f64;
    for (id, done) in covered.iter().enumerate() {
        if !done {
            stats.oov_rows += 1;
            for x in matrix.row_mut(id) {
                *x = rng.gen_range(-bound..=bound);
            }
        }
    }
    (EmbeddingTable { matrix }, stats)
}

/// Writes every vocabulary row in word2vec text format. Values use the
/// shortest representation that parses back to the same `f64`.
pub fn write_vectors<W: Write>(mut w: W, table: &EmbeddingTable, vocab: &Vocab) -> std::io::Result<()> {
    writeln!(w, "{} {}", vocab.len(), table.dim())?;
    for (id, word) in vocab.words().iter().enumerate() {
        write!(w, "{word}")?;
        for x in table.row(id) {
            write!(w, " {x}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn save_embeddings(path: &Path, table: &EmbeddingTable, vocab: &Vocab) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_vectors(&mut w, table, vocab)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}
