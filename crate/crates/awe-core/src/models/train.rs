//! Mini-batch trainers for the three model kinds. All share one epoch loop:
//! shuffle, accumulate per-item gradients, average over the batch, clip by
//! global norm, Adam step. Every run is a pure function of its inputs, the
//! config and the seed.

use std::collections::{BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    ae_loss_node, cae_loss_node, classifier_loss_node, classifier_predict, frame_tensors,
    ModelError, TrainConfig,
};
use crate::corpus::{PairList, Vocabulary, WordSegment};
use crate::features::FeatureSequence;
use crate::grad::{
    adam_step, clip_global_norm, AdamState, ArchDescriptor, Gradients, ModelParameters,
    NodeId, Real, Tape, Tensor,
};

/// A word token together with its extracted features.
#[derive(Clone, Debug)]
pub struct TrainingSegment {
    pub segment: WordSegment,
    pub features: FeatureSequence,
}

/// Trained model plus per-epoch mean losses and filtering counts.
#[derive(Clone, Debug)]
pub struct TrainOutcome<P: Real> {
    pub model: ModelParameters<P>,
    /// Mean item loss per epoch of the main phase.
    pub loss_trace: Vec<f64>,
    /// Mean item loss per autoencoder warm-up epoch; empty unless the CAE
    /// trainer ran a warm-up.
    pub pretrain_trace: Vec<f64>,
    /// Items excluded for having fewer than 2 frames: segments for the AE
    /// and classifier trainers, whole pairs for the CAE trainer.
    pub dropped_short: usize,
    /// Segments excluded by the classifier trainer because they carry no
    /// label or their word type is outside the vocabulary.
    pub dropped_unlabeled: usize,
}

const MIN_FRAMES: usize = 2;

fn check_dims(items: &[TrainingSegment], arch: &ArchDescriptor) -> Result<(), ModelError> {
    for item in items {
        if item.features.dim() != arch.input_dim {
            return Err(ModelError::InputDimMismatch {
                expected: arch.input_dim,
                got: item.features.dim(),
            });
        }
    }
    Ok(())
}

/// One optimization phase over `n_items` with a fresh optimizer state.
fn run_phase<P: Real>(
    model: &mut ModelParameters<P>,
    n_items: usize,
    epochs: usize,
    cfg: &TrainConfig,
    rng: &mut ChaCha8Rng,
    mut loss_for: impl FnMut(&mut Tape<'_, P>, usize) -> Result<NodeId, ModelError>,
) -> Result<Vec<f64>, ModelError> {
    let mut adam = AdamState::new(&model.params, cfg.learning_rate);
    let clip = P::from_f64(cfg.clip_norm);
    let mut order: Vec<usize> = (0..n_items).collect();
    let mut trace = Vec::with_capacity(epochs);
    for _ in 0..epochs {
        order.shuffle(rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut grads = Gradients::empty(model.params.len());
            for &item in batch {
                let mut tape = Tape::new(&model.params);
                let loss = loss_for(&mut tape, item)?;
                epoch_loss += tape.value(loss).item().as_f64();
                grads.accumulate(&tape.grad(loss)?);
            }
            grads.scale(P::from_f64(1.0 / batch.len() as f64));
            clip_global_norm(&mut grads, clip);
            adam_step(&mut model.params, &grads, &mut adam)?;
        }
        trace.push(epoch_loss / n_items as f64);
    }
    Ok(trace)
}

/// Train a recurrent autoencoder to reconstruct each segment from its own
/// embedding.
pub fn train_ae<P: Real>(
    items: &[TrainingSegment],
    arch: &ArchDescriptor,
    cfg: &TrainConfig,
) -> Result<TrainOutcome<P>, ModelError> {
    cfg.validate()?;
    if arch.is_classifier() {
        return Err(ModelError::WrongModelKind {
            op: "train_ae",
            expected: "encoder-decoder",
        });
    }
    check_dims(items, arch)?;
    let usable: Vec<&TrainingSegment> = items
        .iter()
        .filter(|s| s.features.t() >= MIN_FRAMES)
        .collect();
    let dropped_short = items.len() - usable.len();
    if usable.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }

    let mut model = ModelParameters::<P>::init(arch.clone(), cfg.seed)?;
    let ids = model.ids();
    let tensors: Vec<Vec<Tensor<P>>> = usable.iter().map(|s| frame_tensors(&s.features)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let loss_trace = run_phase(&mut model, tensors.len(), cfg.epochs, cfg, &mut rng, |tape, i| {
        ae_loss_node(tape, &ids, &tensors[i])
    })?;
    Ok(TrainOutcome {
        model,
        loss_trace,
        pretrain_trace: Vec::new(),
        dropped_short,
        dropped_unlabeled: 0,
    })
}

/// Train a correspondence autoencoder on segment pairs. Each surviving pair
/// contributes both directions. An optional autoencoder warm-up runs first
/// over the distinct segments the pairs mention.
pub fn train_cae<P: Real>(
    items: &[TrainingSegment],
    pairs: &PairList,
    arch: &ArchDescriptor,
    cfg: &TrainConfig,
) -> Result<TrainOutcome<P>, ModelError> {
    cfg.validate()?;
    if arch.is_classifier() {
        return Err(ModelError::WrongModelKind {
            op: "train_cae",
            expected: "encoder-decoder",
        });
    }
    check_dims(items, arch)?;

    let mut by_id: HashMap<&str, usize> = HashMap::new();
    for (i, item) in items.iter().enumerate() {
        by_id.entry(item.segment.segment_id.as_str()).or_insert(i);
    }
    let mut kept: Vec<(usize, usize)> = Vec::new();
    let mut dropped_short = 0;
    for (a, b) in &pairs.pairs {
        let ia = *by_id
            .get(a.as_str())
            .ok_or_else(|| ModelError::UnknownSegment(a.clone()))?;
        let ib = *by_id
            .get(b.as_str())
            .ok_or_else(|| ModelError::UnknownSegment(b.clone()))?;
        if items[ia].features.t() >= MIN_FRAMES && items[ib].features.t() >= MIN_FRAMES {
            kept.push((ia, ib));
        } else {
            dropped_short += 1;
        }
    }
    if kept.is_empty() {
        return Err(ModelError::NoPairsAvailable);
    }

    let mut model = ModelParameters::<P>::init(arch.clone(), cfg.seed)?;
    let ids = model.ids();
    let mentioned: Vec<usize> = kept
        .iter()
        .flat_map(|&(a, b)| [a, b])
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let tensors: Vec<Option<Vec<Tensor<P>>>> = items
        .iter()
        .enumerate()
        .map(|(i, s)| {
            mentioned
                .binary_search(&i)
                .ok()
                .map(|_| frame_tensors(&s.features))
        })
        .collect();
    let frames = |i: usize| tensors[i].as_deref().expect("mentioned segments converted");

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let pretrain_trace = run_phase(
        &mut model,
        mentioned.len(),
        cfg.pretrain_epochs,
        cfg,
        &mut rng,
        |tape, i| ae_loss_node(tape, &ids, frames(mentioned[i])),
    )?;
    let directed: Vec<(usize, usize)> = kept.iter().flat_map(|&(a, b)| [(a, b), (b, a)]).collect();
    let loss_trace = run_phase(
        &mut model,
        directed.len(),
        cfg.epochs,
        cfg,
        &mut rng,
        |tape, i| {
            let (src, tgt) = directed[i];
            cae_loss_node(tape, &ids, frames(src), frames(tgt))
        },
    )?;
    Ok(TrainOutcome {
        model,
        loss_trace,
        pretrain_trace,
        dropped_short,
        dropped_unlabeled: 0,
    })
}

/// Train a word classifier over the vocabulary's joint class set. Segments
/// without a label, or whose word type is outside the vocabulary, are
/// skipped and counted.
pub fn train_classifier<P: Real>(
    items: &[TrainingSegment],
    vocab: &Vocabulary,
    arch: &ArchDescriptor,
    cfg: &TrainConfig,
) -> Result<TrainOutcome<P>, ModelError> {
    cfg.validate()?;
    let Some(k) = arch.n_classes else {
        return Err(ModelError::WrongModelKind {
            op: "train_classifier",
            expected: "classifier",
        });
    };
    if k != vocab.k() {
        return Err(ModelError::BadConfig(format!(
            "model has {k} classes but vocabulary has {}",
            vocab.k()
        )));
    }
    check_dims(items, arch)?;

    let mut usable: Vec<(&TrainingSegment, usize)> = Vec::new();
    let mut dropped_short = 0;
    let mut dropped_unlabeled = 0;
    for item in items {
        if item.features.t() < MIN_FRAMES {
            dropped_short += 1;
            continue;
        }
        let class = item
            .segment
            .word_type
            .as_deref()
            .and_then(|w| vocab.class_of(&item.segment.language, w));
        match class {
            Some(c) => usable.push((item, c)),
            None => dropped_unlabeled += 1,
        }
    }
    if usable.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }

    let mut model = ModelParameters::<P>::init(arch.clone(), cfg.seed)?;
    let ids = model.ids();
    let data: Vec<(Vec<Tensor<P>>, usize)> = usable
        .iter()
        .map(|(s, c)| (frame_tensors(&s.features), *c))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let loss_trace = run_phase(&mut model, data.len(), cfg.epochs, cfg, &mut rng, |tape, i| {
        let (frames, class) = &data[i];
        classifier_loss_node(tape, &ids, k, frames, *class)
    })?;
    Ok(TrainOutcome {
        model,
        loss_trace,
        pretrain_trace: Vec::new(),
        dropped_short,
        dropped_unlabeled,
    })
}

/// Fraction of labeled, in-vocabulary segments the classifier assigns to
/// their true class.
pub fn classifier_accuracy<P: Real>(
    model: &ModelParameters<P>,
    items: &[TrainingSegment],
    vocab: &Vocabulary,
) -> Result<f64, ModelError> {
    let mut correct = 0usize;
    let mut total = 0usize;
    for item in items {
        let Some(class) = item
            .segment
            .word_type
            .as_deref()
            .and_then(|w| vocab.class_of(&item.segment.language, w))
        else {
            continue;
        };
        total += 1;
        if classifier_predict(model, &item.features)? == class {
            correct += 1;
        }
    }
    if total == 0 {
        return Err(ModelError::EmptyTrainingSet);
    }
    Ok(correct as f64 / total as f64)
}
