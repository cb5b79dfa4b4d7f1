//! Gazetteer-based concept extraction and longest-span subsumption.

mod extract;
mod gazetteer;
mod subsume;

pub use extract::{char_slice, cui_set, extract_concepts, ConceptSpan};
pub use gazetteer::{normalize, Gazetteer};
pub use subsume::subsumption_filter;
