//! Deterministic reverse-mode differentiation sized for small recurrent
//! models: a flat tape over vectors and matrices, GRU layers, Adam, and a
//! binary checkpoint format. Generic over [`Real`] so the same code runs in
//! 32-bit for training speed and 64-bit for numeric tests.

pub mod adam;
pub mod check;
pub mod checkpoint;
pub mod real;
pub mod rnn;
pub mod tape;
pub mod tensor;

pub use adam::{adam_step, clip_global_norm, AdamState};
pub use check::{finite_difference_gradients, max_relative_error};
pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointError};
pub use real::Real;
pub use rnn::{
    classifier_logits, embed_transform, expected_tensors, gru_cell, rnn_decode, rnn_encode,
    ArchDescriptor, GruLayerIds, ModelIds, ModelParameters,
};
pub use tape::{softmax, GradError, Gradients, NodeId, ParamId, ParamSet, Tape};
pub use tensor::Tensor;
