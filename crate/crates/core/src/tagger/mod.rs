//! BiLSTM-CRF token labeler: hybrid word + character embeddings, a
//! contextual BiLSTM, a label scoring layer, and a linear-chain CRF.

mod ablation;
mod eval;
mod model;
pub mod synthetic;
mod train;

pub use ablation::{
    ablation_grid, ablation_run, write_ablation_csv, AblationConfig, AblationRow, AblationStatus,
    EmbeddingSource,
};
pub use eval::{evaluate, predict_documents, EvalReport, LabelMetrics};
pub use model::{
    build_model, DocGradient, DropoutConfig, EncodedDoc, ModelConfig, NetworkParams, TaggerModel,
    TaggerParams, WordEmbeddingMode,
};
pub use train::{doc_rng, train, EpochRecord, TrainConfig, TrainHistory};
