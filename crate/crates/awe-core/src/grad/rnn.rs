//! GRU encoder/decoder building blocks recorded on a [`Tape`].
//!
//! The cell follows the original gating:
//!
//! ```text
//! z = sigmoid(Wz x + Uz h + bz)
//! r = sigmoid(Wr x + Ur h + br)
//! n = tanh(Wh x + Uh (r * h) + bh)
//! h' = (1 - z) * h + z * n
//! ```
//!
//! The encoder is a stack of unidirectional layers; the embedding is a linear
//! map of the top layer's final hidden state. The decoder is another stack
//! that receives the embedding as its input at every step, starting from zero
//! hidden states, with a linear output map per step.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::real::Real;
use super::tape::{GradError, NodeId, ParamId, ParamSet, Tape};
use super::tensor::Tensor;

/// Shape-level description of a model. `n_classes` selects the classifier
/// head (encoder + embedding + softmax layer, no decoder); otherwise the
/// model is an encoder-decoder.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchDescriptor {
    pub input_dim: usize,
    pub hidden_units: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub embed_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_classes: Option<usize>,
}

impl Default for ArchDescriptor {
    fn default() -> Self {
        ArchDescriptor {
            input_dim: 13,
            hidden_units: 400,
            encoder_layers: 3,
            decoder_layers: 3,
            embed_dim: 130,
            n_classes: None,
        }
    }
}

impl ArchDescriptor {
    pub fn validate(&self) -> Result<(), GradError> {
        let positive = [
            ("input_dim", self.input_dim),
            ("hidden_units", self.hidden_units),
            ("encoder_layers", self.encoder_layers),
            ("embed_dim", self.embed_dim),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(GradError::BadDescriptor(format!("{name} must be >= 1")));
            }
        }
        match self.n_classes {
            Some(0) => Err(GradError::BadDescriptor("n_classes must be >= 1".into())),
            Some(_) => Ok(()),
            None if self.decoder_layers == 0 => Err(GradError::BadDescriptor(
                "decoder_layers must be >= 1 for encoder-decoder models".into(),
            )),
            None => Ok(()),
        }
    }

    pub fn is_classifier(&self) -> bool {
        self.n_classes.is_some()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct GruLayerIds {
    pub wz: ParamId,
    pub uz: ParamId,
    pub bz: ParamId,
    pub wr: ParamId,
    pub ur: ParamId,
    pub br: ParamId,
    pub wh: ParamId,
    pub uh: ParamId,
    pub bh: ParamId,
}

/// Resolved parameter handles for one model.
#[derive(Clone, Debug)]
pub struct ModelIds {
    pub enc: Vec<GruLayerIds>,
    pub emb_w: ParamId,
    pub emb_b: ParamId,
    pub dec: Vec<GruLayerIds>,
    pub out_w: ParamId,
    pub out_b: ParamId,
    pub cls_w: ParamId,
    pub cls_b: ParamId,
}

/// Named tensors plus the descriptor they must stay consistent with.
#[derive(Clone, Debug)]
pub struct ModelParameters<P> {
    pub arch: ArchDescriptor,
    pub params: ParamSet<P>,
}

/// (name, shape) pairs in canonical build order for a descriptor.
pub fn expected_tensors(arch: &ArchDescriptor) -> Vec<(String, Vec<usize>)> {
    fn gru(out: &mut Vec<(String, Vec<usize>)>, h: usize, prefix: String, in_dim: usize) {
        for gate in ["z", "r", "h"] {
            out.push((format!("{prefix}.w{gate}"), vec![h, in_dim]));
            out.push((format!("{prefix}.u{gate}"), vec![h, h]));
            out.push((format!("{prefix}.b{gate}"), vec![h]));
        }
    }
    let (d, h, m) = (arch.input_dim, arch.hidden_units, arch.embed_dim);
    let mut out = Vec::new();
    for l in 0..arch.encoder_layers {
        gru(&mut out, h, format!("enc{l}"), if l == 0 { d } else { h });
    }
    out.push(("emb.w".into(), vec![m, h]));
    out.push(("emb.b".into(), vec![m]));
    if let Some(k) = arch.n_classes {
        out.push(("cls.w".into(), vec![k, m]));
        out.push(("cls.b".into(), vec![k]));
    } else {
        for l in 0..arch.decoder_layers {
            gru(&mut out, h, format!("dec{l}"), if l == 0 { m } else { h });
        }
        out.push(("out.w".into(), vec![d, h]));
        out.push(("out.b".into(), vec![d]));
    }
    out
}

impl<P: Real> ModelParameters<P> {
    /// Fresh parameters: matrices uniform in (-1/sqrt(fan_in), 1/sqrt(fan_in))
    /// drawn from a seeded stream in canonical order, biases zero. The draw
    /// happens in f64 so the same seed yields matching values across
    /// precisions up to rounding.
    pub fn init(arch: ArchDescriptor, seed: u64) -> Result<Self, GradError> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        for (name, shape) in expected_tensors(&arch) {
            let tensor = if shape.len() == 2 {
                let bound = 1.0 / (shape[1] as f64).sqrt();
                let data = (0..shape[0] * shape[1])
                    .map(|_| P::from_f64(rng.gen_range(-bound..bound)))
                    .collect();
                Tensor::new(shape, data)
            } else {
                Tensor::zeros(&shape)
            };
            params.add(&name, tensor)?;
        }
        Ok(ModelParameters { arch, params })
    }

    /// Wrap an existing set, checking names and shapes against the descriptor.
    pub fn from_parts(arch: ArchDescriptor, params: ParamSet<P>) -> Result<Self, GradError> {
        arch.validate()?;
        let expected = expected_tensors(&arch);
        if expected.len() != params.len() {
            return Err(GradError::BadDescriptor(format!(
                "descriptor expects {} tensors, got {}",
                expected.len(),
                params.len()
            )));
        }
        for ((name, shape), (got_name, got)) in expected.iter().zip(params.iter()) {
            if name != got_name || shape.as_slice() != got.shape() {
                return Err(GradError::BadDescriptor(format!(
                    "tensor `{got_name}` {:?} does not match expected `{name}` {:?}",
                    got.shape(),
                    shape
                )));
            }
        }
        Ok(ModelParameters { arch, params })
    }

    pub fn ids(&self) -> ModelIds {
        let id = |n: &str| self.params.id(n).expect("validated parameter set");
        let gru = |prefix: &str| GruLayerIds {
            wz: id(&format!("{prefix}.wz")),
            uz: id(&format!("{prefix}.uz")),
            bz: id(&format!("{prefix}.bz")),
            wr: id(&format!("{prefix}.wr")),
            ur: id(&format!("{prefix}.ur")),
            br: id(&format!("{prefix}.br")),
            wh: id(&format!("{prefix}.wh")),
            uh: id(&format!("{prefix}.uh")),
            bh: id(&format!("{prefix}.bh")),
        };
        let enc = (0..self.arch.encoder_layers)
            .map(|l| gru(&format!("enc{l}")))
            .collect();
        let (dec, out_w, out_b, cls_w, cls_b);
        if self.arch.is_classifier() {
            dec = Vec::new();
            // Placeholders pointing at the embedding layer; never used for
            // classifier models.
            out_w = id("emb.w");
            out_b = id("emb.b");
            cls_w = id("cls.w");
            cls_b = id("cls.b");
        } else {
            dec = (0..self.arch.decoder_layers)
                .map(|l| gru(&format!("dec{l}")))
                .collect();
            out_w = id("out.w");
            out_b = id("out.b");
            cls_w = id("emb.w");
            cls_b = id("emb.b");
        }
        ModelIds {
            enc,
            emb_w: id("emb.w"),
            emb_b: id("emb.b"),
            dec,
            out_w,
            out_b,
            cls_w,
            cls_b,
        }
    }

    pub fn cast<Q: Real>(&self) -> ModelParameters<Q> {
        ModelParameters {
            arch: self.arch.clone(),
            params: self.params.cast(),
        }
    }
}

/// One GRU step. `x` and `h_prev` are tape nodes; returns the new hidden
/// state node.
pub fn gru_cell<P: Real>(
    tape: &mut Tape<P>,
    layer: &GruLayerIds,
    x: NodeId,
    h_prev: NodeId,
) -> Result<NodeId, GradError> {
    let gate = |tape: &mut Tape<P>, w, u, b, x, h| -> Result<NodeId, GradError> {
        let wn = tape.param(w);
        let un = tape.param(u);
        let bn = tape.param(b);
        let wx = tape.matvec(wn, x)?;
        let uh = tape.matvec(un, h)?;
        let s = tape.add(wx, uh)?;
        tape.add(s, bn)
    };
    let z_pre = gate(tape, layer.wz, layer.uz, layer.bz, x, h_prev)?;
    let z = tape.sigmoid(z_pre);
    let r_pre = gate(tape, layer.wr, layer.ur, layer.br, x, h_prev)?;
    let r = tape.sigmoid(r_pre);
    let rh = tape.mul(r, h_prev)?;
    let n_pre = gate(tape, layer.wh, layer.uh, layer.bh, x, rh)?;
    let n = tape.tanh(n_pre);

    let h = tape.value(h_prev).len();
    let ones = tape.constant(Tensor::new(vec![h], vec![P::one(); h]));
    let keep = tape.sub(ones, z)?;
    let kept = tape.mul(keep, h_prev)?;
    let new = tape.mul(z, n)?;
    tape.add(kept, new)
}

/// Run the stacked encoder over `frames` (each a D-vector) and return the top
/// layer's hidden state after the last frame.
pub fn rnn_encode<P: Real>(
    tape: &mut Tape<P>,
    ids: &ModelIds,
    frames: &[Tensor<P>],
) -> Result<NodeId, GradError> {
    if frames.is_empty() {
        return Err(GradError::EmptyInput("rnn_encode"));
    }
    let h_units = tape.params().get(ids.enc[0].bz).len();
    let mut hidden: Vec<NodeId> = (0..ids.enc.len())
        .map(|_| tape.constant(Tensor::zeros(&[h_units])))
        .collect();
    for frame in frames {
        let mut input = tape.constant(frame.clone());
        for (l, layer) in ids.enc.iter().enumerate() {
            hidden[l] = gru_cell(tape, layer, input, hidden[l])?;
            input = hidden[l];
        }
    }
    Ok(*hidden.last().expect("validated descriptor has layers"))
}

/// Linear map from the final hidden state to the embedding.
pub fn embed_transform<P: Real>(
    tape: &mut Tape<P>,
    ids: &ModelIds,
    h_final: NodeId,
) -> Result<NodeId, GradError> {
    let w = tape.param(ids.emb_w);
    let b = tape.param(ids.emb_b);
    let wh = tape.matvec(w, h_final)?;
    tape.add(wh, b)
}

/// Unroll the decoder for `t_out` steps conditioned on `z`, returning one
/// output frame node per step.
pub fn rnn_decode<P: Real>(
    tape: &mut Tape<P>,
    ids: &ModelIds,
    z: NodeId,
    t_out: usize,
) -> Result<Vec<NodeId>, GradError> {
    if t_out == 0 {
        return Err(GradError::EmptyInput("rnn_decode"));
    }
    if ids.dec.is_empty() {
        return Err(GradError::BadDescriptor(
            "model has no decoder stack".into(),
        ));
    }
    let h_units = tape.params().get(ids.dec[0].bz).len();
    let mut hidden: Vec<NodeId> = (0..ids.dec.len())
        .map(|_| tape.constant(Tensor::zeros(&[h_units])))
        .collect();
    let out_w = tape.param(ids.out_w);
    let out_b = tape.param(ids.out_b);
    let mut outputs = Vec::with_capacity(t_out);
    for _ in 0..t_out {
        let mut input = z;
        for (l, layer) in ids.dec.iter().enumerate() {
            hidden[l] = gru_cell(tape, layer, input, hidden[l])?;
            input = hidden[l];
        }
        let proj = tape.matvec(out_w, input)?;
        outputs.push(tape.add(proj, out_b)?);
    }
    Ok(outputs)
}

/// Softmax-layer logits for a classifier model.
pub fn classifier_logits<P: Real>(
    tape: &mut Tape<P>,
    ids: &ModelIds,
    z: NodeId,
) -> Result<NodeId, GradError> {
    let w = tape.param(ids.cls_w);
    let b = tape.param(ids.cls_b);
    let wz = tape.matvec(w, z)?;
    tape.add(wz, b)
}
