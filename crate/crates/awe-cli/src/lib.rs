//! Experiment runners and stock corpora behind the `awe` binary.
//!
//! [`corpora`] defines the default multilingual synthetic corpus and the
//! language-family corpus used for transfer experiments. [`experiments`]
//! drives the model-comparison table, the training-language ablation and the
//! cross-lingual transfer matrix, writing CSV results and a reproducibility
//! manifest for each run.

use thiserror::Error;

pub mod corpora;
pub mod experiments;

/// Any failure an experiment run can hit.
#[derive(Debug, Error)]
pub enum RunnerError {
    #[error(transparent)]
    Corpus(#[from] awe_core::corpus::CorpusError),
    #[error(transparent)]
    Synth(#[from] awe_core::synth::SynthError),
    #[error(transparent)]
    Model(#[from] awe_core::models::ModelError),
    #[error(transparent)]
    Grad(#[from] awe_core::grad::GradError),
    #[error(transparent)]
    SameDiff(#[from] awe_core::samediff::SameDiffError),
    #[error(transparent)]
    Features(#[from] awe_core::features::FeatError),
    #[error(transparent)]
    Dtw(#[from] awe_core::dtw::DtwError),
    #[error(transparent)]
    Checkpoint(#[from] awe_core::grad::CheckpointError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("evaluation-language data reached a training set: {0}")]
    EvalLeakage(String),
    #[error("{0}")]
    Invalid(String),
}
