use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit<T> {
    pub train: Vec<T>,
    pub dev: Vec<T>,
    pub test: Vec<T>,
}

/// Sizes of a 70/15/15 split: floor(0.7n), floor(0.15n), remainder.
pub fn split_sizes(n: usize) -> (usize, usize, usize) {
    let train = n * 70 / 100;
    let dev = n * 15 / 100;
    (train, dev, n - train - dev)
}

/// Shuffles with a seeded ChaCha8 stream and cuts 70/15/15.
pub fn split_dataset<T>(docs: Vec<T>, seed: u64) -> Result<DatasetSplit<T>> {
    let n = docs.len();
    if n < 3 {
        return Err(Error::TooFewDocuments(n));
    }
    let (n_train, n_dev, _) = split_sizes(n);
    let mut docs = docs;
    docs.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let test = docs.split_off(n_train + n_dev);
    let dev = docs.split_off(n_train);
    Ok(DatasetSplit {
        train: docs,
        dev,
        test,
    })
}
