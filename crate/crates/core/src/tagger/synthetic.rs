//! Seeded toy corpora with known labeling rules.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{DatasetSplit, Label, LabeledDocument, NUM_LABELS};

const CONSONANTS: &[u8] = b"bcdfghlmnprst";
const VOWELS: &[u8] = b"aeiou";

fn syllable<R: Rng>(rng: &mut R) -> String {
    let c = CONSONANTS[rng.gen_range(0..CONSONANTS.len())] as char;
    let v = VOWELS[rng.gen_range(0..VOWELS.len())] as char;
    format!("{c}{v}")
}

fn distinct_words<R: Rng>(n: usize, syllables: std::ops::RangeInclusive<usize>, rng: &mut R) -> Vec<String> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let k = rng.gen_range(syllables.clone());
        let w: String = (0..k).map(|_| syllable(rng)).collect();
        if seen.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

fn random_doc<R: Rng>(id: String, lexicon: &[Vec<String>], labels: &[Label], rng: &mut R) -> LabeledDocument {
    let len = rng.gen_range(8..=20);
    let words: Vec<(String, Label)> = (0..len)
        .map(|_| {
            let k = rng.gen_range(0..labels.len());
            (lexicon[k].choose(rng).unwrap().clone(), labels[k])
        })
        .collect();
    let refs: Vec<(&str, Label)> = words.iter().map(|(w, l)| (w.as_str(), *l)).collect();
    LabeledDocument::from_words(&id, &refs)
}

/// Every label owns `words_per_label` words and each token's label is the
/// owner of its word. Labels are drawn uniformly per token, so context
/// carries no information.
pub fn separable_corpus(n_docs: usize, words_per_label: usize, seed: u64) -> Vec<LabeledDocument> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let words = distinct_words(NUM_LABELS * words_per_label, 2..=3, &mut rng);
    let lexicon: Vec<Vec<String>> = words.chunks(words_per_label).map(<[String]>::to_vec).collect();
    (0..n_docs)
        .map(|i| random_doc(format!("sep{i:04}"), &lexicon, &Label::ALL, &mut rng))
        .collect()
}

/// Suffix letters for the morphology task, one per label in order.
pub const MORPHOLOGY_SUFFIXES: [char; 5] = ['q', 'x', 'z', 'k', 'v'];

/// Labels are fixed by a word's final letter (see [`MORPHOLOGY_SUFFIXES`]).
/// Train, dev and test draw from disjoint stem sets, so evaluation words are
/// never seen in training and only their spelling reveals the label.
pub fn morphology_task(
    n_train: usize,
    n_dev: usize,
    n_test: usize,
    stems_per_part: usize,
    seed: u64,
) -> DatasetSplit<LabeledDocument> {
    let labels = &Label::ALL[..MORPHOLOGY_SUFFIXES.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stems = distinct_words(3 * stems_per_part, 2..=3, &mut rng);
    let part = |name: &str, stems: &[String], n: usize, rng: &mut ChaCha8Rng| -> Vec<LabeledDocument> {
        let lexicon: Vec<Vec<String>> = MORPHOLOGY_SUFFIXES
            .iter()
            .map(|s| stems.iter().map(|st| format!("{st}{s}")).collect())
            .collect();
        (0..n)
            .map(|i| random_doc(format!("{name}{i:04}"), &lexicon, labels, rng))
            .collect()
    };
    let train = part("mtr", &stems[..stems_per_part], n_train, &mut rng);
    let dev = part("mdv", &stems[stems_per_part..2 * stems_per_part], n_dev, &mut rng);
    let test = part("mts", &stems[2 * stems_per_part..], n_test, &mut rng);
    DatasetSplit { train, dev, test }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::{BTreeMap, HashSet};

    #[test]
    fn separable_words_have_one_label() {
        let docs = separable_corpus(50, 4, 3);
        assert_eq!(docs.len(), 50);
        let mut owner: BTreeMap<String, Label> = BTreeMap::new();
        for d in &docs {
            assert!((8..=20).contains(&d.len()));
            for (w, l) in d.words().zip(&d.labels) {
                assert_eq!(*owner.entry(w.to_string()).or_insert(*l), *l);
            }
        }
        assert_eq!(owner.len(), 40);
        assert_eq!(docs, separable_corpus(50, 4, 3));
    }

    #[test]
    fn morphology_splits_are_disjoint_and_rule_bound() {
        let split = morphology_task(30, 10, 10, 40, 5);
        let vocab = |docs: &[LabeledDocument]| -> HashSet<String> {
            docs.iter().flat_map(|d| d.words().map(str::to_string)).collect()
        };
        let (tr, dv, ts) = (vocab(&split.train), vocab(&split.dev), vocab(&split.test));
        assert!(tr.is_disjoint(&dv) && tr.is_disjoint(&ts) && dv.is_disjoint(&ts));
        for d in split.train.iter().chain(&split.dev).chain(&split.test) {
            for (w, l) in d.words().zip(&d.labels) {
                let last = w.chars().last().unwrap();
                assert_eq!(MORPHOLOGY_SUFFIXES[l.id()], last);
            }
        }
    }
}
