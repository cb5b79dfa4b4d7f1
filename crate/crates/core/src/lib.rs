//! Concept-overlap recall analysis for discharge summaries and a word-level
//! BiLSTM-CRF topic labeler for history-of-present-illness notes.
//!
//! The crate is organized bottom-up:
//!
//! - [`corpus`]: note records, section splitting, tokenization, annotation
//!   parsing and dataset splits.
//! - [`concepts`]: gazetteer concept matching and longest-span subsumption.
//! - [`overlap`]: concept recall of summaries against the rest of the record.
//! - [`embeddings`]: vocabularies, word2vec pretraining, vector file IO.
//! - [`nn`]: dense layers, LSTMs, dropout and Adam with analytic backward passes.
//! - [`crf`]: linear-chain CRF scoring, partition function, Viterbi, NLL gradients.
//! - [`tagger`]: the assembled BiLSTM-CRF model, training loop and evaluation.
//! - [`reference`]: reference figures from restricted clinical data, for comparison only.
//!
//! Batch work (per-document gradients, per-note concept extraction, ablation
//! rows) fans out over rayon when the `parallel` feature is enabled and runs
//! sequentially otherwise. Reductions always happen in input order, so both
//! builds produce bit-identical results.

pub mod concepts;
pub mod corpus;
pub mod crf;
pub mod embeddings;
mod error;
pub mod nn;
pub mod overlap;
pub mod par;
pub mod reference;
pub mod tagger;

pub use error::{Error, Result};
