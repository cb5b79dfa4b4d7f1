use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
const PAD_TOKEN: &str = "<pad>";
const UNK_TOKEN: &str = "<unk>";

/// Token-to-id mapping with reserved `PAD = 0` and `UNK = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    words: Vec<String>,
    id_of: HashMap<String, usize>,
}

impl Vocab {
    /// A vocabulary holding only the reserved entries.
    pub fn new() -> Self {
        Self::from_words(Vec::new())
    }

    /// Builds from non-reserved words in id order (ids start at 2).
    pub fn from_words(words: Vec<String>) -> Self {
        let mut all = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        all.extend(words.into_iter().filter(|w| w != PAD_TOKEN && w != UNK_TOKEN));
        let id_of = all.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Vocab { words: all, id_of }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.len() <= 2
    }

    pub fn get(&self, word: &str) -> Option<usize> {
        self.id_of.get(word).copied()
    }

    /// Id of `word`, or [`UNK`].
    pub fn id(&self, word: &str) -> usize {
        self.get(word).unwrap_or(UNK)
    }

    pub fn word(&self, id: usize) -> &str {
        &self.words[id]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }
}

impl Default for Vocab {
    fn default() -> Self {
        Self::new()
    }
}

impl From<Vec<String>> for Vocab {
    fn from(all: Vec<String>) -> Self {
        Self::from_words(all)
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.words
    }
}

/// Every token seen at least `min_count` times, ordered by descending
/// frequency and then lexicographically.
pub fn build_vocab<'a, I, S>(corpus: I, min_count: usize) -> Vocab
where
    I: IntoIterator<Item = S>,
    S: IntoIterator<Item = &'a str>,
{
    let min_count = min_count.max(1);
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for seq in corpus {
        for tok in seq {
            *counts.entry(tok).or_default() += 1;
        }
    }
    let mut entries: Vec<(&str, usize)> = counts.into_iter().filter(|&(_, c)| c >= min_count).collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    Vocab::from_words(entries.into_iter().map(|(w, _)| w.to_string()).collect())
}

/// Character-to-id mapping. Always covers printable ASCII; other characters
/// seen at construction are appended in code-point order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<char>", into = "Vec<char>")]
pub struct CharVocab {
    chars: Vec<char>,
    id_of: HashMap<char, usize>,
}

impl CharVocab {
    pub fn new<'a>(words: impl IntoIterator<Item = &'a str>) -> Self {
        let mut extra: Vec<char> = words
            .into_iter()
            .flat_map(str::chars)
            .filter(|c| !(' '..='~').contains(c))
            .collect();
        extra.sort_unstable();
        extra.dedup();
        let chars: Vec<char> = (' '..='~').chain(extra).collect();
        Self::from(chars)
    }

    /// Ids are offset by two for PAD and UNK.
    pub fn id(&self, c: char) -> usize {
        self.id_of.get(&c).copied().unwrap_or(UNK)
    }

    pub fn len(&self) -> usize {
        self.chars.len() + 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl From<Vec<char>> for CharVocab {
    fn from(chars: Vec<char>) -> Self {
        let id_of = chars.iter().enumerate().map(|(i, &c)| (c, i + 2)).collect();
        CharVocab { chars, id_of }
    }
}

impl From<CharVocab> for Vec<char> {
    fn from(v: CharVocab) -> Self {
        v.chars
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn min_count_filters() {
        let v = build_vocab([vec!["a", "a", "b"]], 2);
        assert!(v.get("a").is_some());
        assert!(v.get("b").is_none());
        assert_eq!(v.id("b"), UNK);
        assert_eq!(v.word(PAD), "<pad>");
    }

    #[test]
    fn deterministic_order() {
        let corpus = vec![vec!["z", "y", "y", "x", "x", "w"]];
        let a = build_vocab(corpus.clone(), 1);
        let b = build_vocab(corpus, 1);
        assert_eq!(a, b);
        assert_eq!(&a.words()[2..], ["x", "y", "w", "z"]);
    }

    #[test]
    fn empty_corpus_has_only_reserved() {
        let v = build_vocab(Vec::<Vec<&str>>::new(), 1);
        assert_eq!(v.len(), 2);
        assert!(v.is_empty());
    }

    #[test]
    fn thousand_token_corpus_matches_counting_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let words: Vec<String> = (0..60).map(|i| format!("w{i}")).collect();
        let corpus: Vec<Vec<&str>> = (0..50)
            .map(|_| {
                (0..20)
                    // min of two uniforms skews toward low indices
                    .map(|_| words[rng.gen_range(0..60).min(rng.gen_range(0..60))].as_str())
                    .collect()
            })
            .collect();
        assert_eq!(corpus.iter().map(Vec::len).sum::<usize>(), 1000);

        let mut counts: HashMap<&str, usize> = HashMap::new();
        for w in corpus.iter().flatten() {
            *counts.entry(w).or_default() += 1;
        }
        for min_count in [1, 5, 20] {
            let v = build_vocab(corpus.clone(), min_count);
            let expected: usize = counts.values().filter(|&&c| c >= min_count).count();
            assert_eq!(v.len(), expected + 2);
            for (w, &c) in &counts {
                assert_eq!(v.get(w).is_some(), c >= min_count, "{w}");
            }
            for pair in v.words()[2..].windows(2) {
                let (ca, cb) = (counts[pair[0].as_str()], counts[pair[1].as_str()]);
                assert!(ca > cb || (ca == cb && pair[0] < pair[1]));
            }
        }
    }

    #[test]
    fn char_vocab_covers_printable_ascii() {
        let cv = CharVocab::new(["é"]);
        for c in ' '..='~' {
            assert!(cv.id(c) >= 2);
        }
        assert_eq!(cv.id('é'), 2 + 95);
        assert_eq!(cv.id('ß'), UNK);
        let json = serde_json::to_string(&cv).unwrap();
        assert_eq!(serde_json::from_str::<CharVocab>(&json).unwrap(), cv);
    }

    #[test]
    fn vocab_serializes_as_word_list() {
        let v = build_vocab([vec!["b", "a", "b"]], 1);
        let json = serde_json::to_string(&v).unwrap();
        assert_eq!(json, r#"["<pad>","<unk>","b","a"]"#);
        assert_eq!(serde_json::from_str::<Vocab>(&json).unwrap(), v);
    }
}
