//! Acoustic word embedding models over the tape engine: recurrent
//! autoencoder (AE), correspondence autoencoder (CAE) and word classifier,
//! plus the non-learned downsampling baseline.
//!
//! All three models share the encoder + linear embedding transform; `embed`
//! therefore works on any trained model and never looks at labels.

mod train;

pub use train::{
    classifier_accuracy, train_ae, train_cae, train_classifier, TrainOutcome, TrainingSegment,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureSequence;
use crate::grad::{
    classifier_logits, embed_transform, rnn_decode, rnn_encode, GradError, ModelIds,
    ModelParameters, NodeId, Real, Tape, Tensor,
};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Grad(#[from] GradError),
    #[error("training set is empty after filtering")]
    EmptyTrainingSet,
    #[error("no usable training pairs")]
    NoPairsAvailable,
    #[error("class {class} out of range for {k} classes")]
    ClassOutOfRange { class: usize, k: usize },
    #[error("pair references unknown segment `{0}`")]
    UnknownSegment(String),
    #[error("feature dim {got} does not match model input dim {expected}")]
    InputDimMismatch { expected: usize, got: usize },
    #[error("{op} requires a {expected} model")]
    WrongModelKind { op: &'static str, expected: &'static str },
    #[error("invalid training config: {0}")]
    BadConfig(String),
}

/// Fixed-dimensional embedding of one word segment.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding {
    pub segment_id: String,
    pub vector: Vec<f64>,
}

/// Optimization settings shared by all trainers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub clip_norm: f64,
    /// Autoencoder warm-up epochs before correspondence training; only the
    /// CAE trainer reads this. Zero skips the warm-up.
    pub pretrain_epochs: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn ae() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 32,
            learning_rate: 1e-3,
            clip_norm: 5.0,
            pretrain_epochs: 0,
            seed: 0,
        }
    }

    pub fn cae() -> Self {
        TrainConfig {
            pretrain_epochs: 15,
            ..TrainConfig::ae()
        }
    }

    pub fn classifier() -> Self {
        TrainConfig {
            epochs: 50,
            ..TrainConfig::ae()
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.batch_size == 0 {
            return Err(ModelError::BadConfig("batch_size must be positive".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(ModelError::BadConfig(format!(
                "learning_rate {} must be positive",
                self.learning_rate
            )));
        }
        if !(self.clip_norm > 0.0) {
            return Err(ModelError::BadConfig(format!(
                "clip_norm {} must be positive",
                self.clip_norm
            )));
        }
        Ok(())
    }
}

fn check_input_dim<P>(model: &ModelParameters<P>, x: &FeatureSequence) -> Result<(), ModelError> {
    if x.dim() != model.arch.input_dim {
        return Err(ModelError::InputDimMismatch {
            expected: model.arch.input_dim,
            got: x.dim(),
        });
    }
    Ok(())
}

/// Convert a feature sequence into per-frame tensors at the model's working
/// precision, ready for the tape-level loss builders.
pub fn frame_tensors<P: Real>(x: &FeatureSequence) -> Vec<Tensor<P>> {
    x.frames()
        .map(|f| {
            Tensor::new(
                vec![f.len()],
                f.iter().map(|&v| P::from_f64(v)).collect(),
            )
        })
        .collect()
}

/// Correspondence reconstruction loss on the tape: encode `input`, decode
/// for `target.len()` steps, sum squared frame errors against `target`.
pub fn cae_loss_node<P: Real>(
    tape: &mut Tape<'_, P>,
    ids: &ModelIds,
    input: &[Tensor<P>],
    target: &[Tensor<P>],
) -> Result<NodeId, ModelError> {
    if target.is_empty() {
        return Err(GradError::EmptyInput("cae_loss target").into());
    }
    let h = rnn_encode(tape, ids, input)?;
    let z = embed_transform(tape, ids, h)?;
    let outputs = rnn_decode(tape, ids, z, target.len())?;
    let mut total = None;
    for (out, tgt) in outputs.iter().zip(target) {
        let err = tape.sq_err_against(*out, tgt.clone())?;
        total = Some(match total {
            None => err,
            Some(acc) => tape.add(acc, err)?,
        });
    }
    Ok(total.expect("target checked non-empty"))
}

/// Reconstruction loss: the correspondence loss of a segment against itself.
pub fn ae_loss_node<P: Real>(
    tape: &mut Tape<'_, P>,
    ids: &ModelIds,
    frames: &[Tensor<P>],
) -> Result<NodeId, ModelError> {
    cae_loss_node(tape, ids, frames, frames)
}

/// Negative log softmax probability of `class` for the encoded segment.
pub fn classifier_loss_node<P: Real>(
    tape: &mut Tape<'_, P>,
    ids: &ModelIds,
    arch_classes: usize,
    frames: &[Tensor<P>],
    class: usize,
) -> Result<NodeId, ModelError> {
    if class >= arch_classes {
        return Err(ModelError::ClassOutOfRange {
            class,
            k: arch_classes,
        });
    }
    let h = rnn_encode(tape, ids, frames)?;
    let z = embed_transform(tape, ids, h)?;
    let logits = classifier_logits(tape, ids, z)?;
    Ok(tape.log_softmax_nll(logits, class)?)
}

/// Reconstruction loss value for one segment.
pub fn ae_loss<P: Real>(model: &ModelParameters<P>, x: &FeatureSequence) -> Result<f64, ModelError> {
    cae_loss(model, x, x)
}

/// Correspondence loss value: encode `x`, reconstruct `x_prime`.
pub fn cae_loss<P: Real>(
    model: &ModelParameters<P>,
    x: &FeatureSequence,
    x_prime: &FeatureSequence,
) -> Result<f64, ModelError> {
    if model.arch.is_classifier() {
        return Err(ModelError::WrongModelKind {
            op: "cae_loss",
            expected: "encoder-decoder",
        });
    }
    check_input_dim(model, x)?;
    if x_prime.dim() != model.arch.input_dim {
        return Err(ModelError::InputDimMismatch {
            expected: model.arch.input_dim,
            got: x_prime.dim(),
        });
    }
    let ids = model.ids();
    let mut tape = Tape::new(&model.params);
    let input = frame_tensors::<P>(x);
    let target = frame_tensors::<P>(x_prime);
    let loss = cae_loss_node(&mut tape, &ids, &input, &target)?;
    Ok(tape.value(loss).item().as_f64())
}

/// Cross-entropy loss value for one labeled segment.
pub fn classifier_loss<P: Real>(
    model: &ModelParameters<P>,
    x: &FeatureSequence,
    class: usize,
) -> Result<f64, ModelError> {
    let Some(k) = model.arch.n_classes else {
        return Err(ModelError::WrongModelKind {
            op: "classifier_loss",
            expected: "classifier",
        });
    };
    check_input_dim(model, x)?;
    let ids = model.ids();
    let mut tape = Tape::new(&model.params);
    let frames = frame_tensors::<P>(x);
    let loss = classifier_loss_node(&mut tape, &ids, k, &frames, class)?;
    Ok(tape.value(loss).item().as_f64())
}

/// Map a segment to its fixed-dimensional embedding. Works for any model
/// kind and any language; labels are never consulted.
pub fn embed<P: Real>(
    model: &ModelParameters<P>,
    x: &FeatureSequence,
) -> Result<Vec<f64>, ModelError> {
    check_input_dim(model, x)?;
    let ids = model.ids();
    let mut tape = Tape::new(&model.params);
    let frames = frame_tensors::<P>(x);
    let h = rnn_encode(&mut tape, &ids, &frames)?;
    let z = embed_transform(&mut tape, &ids, h)?;
    Ok(tape.value(z).data().iter().map(|v| v.as_f64()).collect())
}

/// Embed many segments in parallel, preserving input order.
pub fn embed_all<P: Real>(
    model: &ModelParameters<P>,
    items: &[(String, FeatureSequence)],
) -> Result<Vec<Embedding>, ModelError> {
    items
        .par_iter()
        .map(|(id, x)| {
            Ok(Embedding {
                segment_id: id.clone(),
                vector: embed(model, x)?,
            })
        })
        .collect()
}

/// Most probable class for a segment under a classifier model; ties go to
/// the lowest class index.
pub fn classifier_predict<P: Real>(
    model: &ModelParameters<P>,
    x: &FeatureSequence,
) -> Result<usize, ModelError> {
    if !model.arch.is_classifier() {
        return Err(ModelError::WrongModelKind {
            op: "classifier_predict",
            expected: "classifier",
        });
    }
    check_input_dim(model, x)?;
    let ids = model.ids();
    let mut tape = Tape::new(&model.params);
    let frames = frame_tensors::<P>(x);
    let h = rnn_encode(&mut tape, &ids, &frames)?;
    let z = embed_transform(&mut tape, &ids, h)?;
    let logits = classifier_logits(&mut tape, &ids, z)?;
    let values = tape.value(logits).data();
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    Ok(best)
}

/// Baseline embedding: sample `keep` equally spaced frames (with linear
/// interpolation between neighbours) and concatenate them, giving a
/// `keep * D` vector. The default `keep = 10` on 13-dimensional features
/// yields 130 dimensions.
pub fn downsample_embed(x: &FeatureSequence, keep: usize) -> Vec<f64> {
    assert!(keep >= 1, "must keep at least one frame");
    let t = x.t();
    let d = x.dim();
    let mut out = Vec::with_capacity(keep * d);
    for i in 0..keep {
        let pos = if keep == 1 {
            0.0
        } else {
            i as f64 * (t - 1) as f64 / (keep - 1) as f64
        };
        let lo = pos.floor() as usize;
        let frac = pos - lo as f64;
        if frac == 0.0 {
            out.extend_from_slice(x.frame(lo));
        } else {
            let hi = (lo + 1).min(t - 1);
            let (a, b) = (x.frame(lo), x.frame(hi));
            out.extend((0..d).map(|j| (1.0 - frac) * a[j] + frac * b[j]));
        }
    }
    out
}
