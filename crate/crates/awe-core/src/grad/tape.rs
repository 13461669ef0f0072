//! Reverse-mode differentiation over a flat tape of vector/matrix nodes.
//!
//! A [`Tape`] records the forward computation of one training item; calling
//! [`Tape::grad`] on the scalar loss node walks the tape backwards once and
//! accumulates exact gradients for every parameter that was touched. Node and
//! accumulation order are fixed by construction order, so gradients are
//! bit-reproducible for a given item and parameter set.

use std::collections::HashMap;

use thiserror::Error;

use super::real::Real;
use super::tensor::Tensor;

#[derive(Debug, Error)]
pub enum GradError {
    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("gradient target has shape {0:?}, expected a scalar")]
    NotScalar(Vec<usize>),
    #[error("computation graph contains a cycle at node {0}")]
    GraphCycle(usize),
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
    #[error("duplicate parameter name `{0}`")]
    DuplicateParam(String),
    #[error("invalid architecture descriptor: {0}")]
    BadDescriptor(String),
    #[error("empty input to {0}")]
    EmptyInput(&'static str),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

/// Named collection of trainable tensors. Insertion order is the canonical
/// order used for gradient clipping, Adam updates and checkpoints.
#[derive(Clone, Debug)]
pub struct ParamSet<P> {
    names: Vec<String>,
    tensors: Vec<Tensor<P>>,
    index: HashMap<String, usize>,
}

impl<P: Real> Default for ParamSet<P> {
    fn default() -> Self {
        Self::new()
    }
}

impl<P: Real> ParamSet<P> {
    pub fn new() -> Self {
        ParamSet {
            names: Vec::new(),
            tensors: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn add(&mut self, name: &str, tensor: Tensor<P>) -> Result<ParamId, GradError> {
        if self.index.contains_key(name) {
            return Err(GradError::DuplicateParam(name.to_string()));
        }
        let id = self.tensors.len();
        self.names.push(name.to_string());
        self.tensors.push(tensor);
        self.index.insert(name.to_string(), id);
        Ok(ParamId(id))
    }

    pub fn id(&self, name: &str) -> Result<ParamId, GradError> {
        self.index
            .get(name)
            .map(|&i| ParamId(i))
            .ok_or_else(|| GradError::UnknownParam(name.to_string()))
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor<P> {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<P> {
        &mut self.tensors[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    /// Iterate in canonical (insertion) order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<P>)> {
        self.names
            .iter()
            .map(|n| n.as_str())
            .zip(self.tensors.iter())
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor<P>)> {
        self.names
            .iter()
            .map(|n| n.as_str())
            .zip(self.tensors.iter_mut())
    }

    /// Total number of scalar parameters.
    pub fn n_scalars(&self) -> usize {
        self.tensors.iter().map(|t| t.len()).sum()
    }

    pub fn cast<Q: Real>(&self) -> ParamSet<Q> {
        ParamSet {
            names: self.names.clone(),
            tensors: self
                .tensors
                .iter()
                .map(|t| t.map(|v| Q::from_f64(v.as_f64())))
                .collect(),
            index: self.index.clone(),
        }
    }
}

/// Per-parameter gradient slots aligned with a [`ParamSet`]. Untouched
/// parameters stay `None` (semantically zero).
#[derive(Clone, Debug)]
pub struct Gradients<P> {
    slots: Vec<Option<Tensor<P>>>,
}

impl<P: Real> Gradients<P> {
    pub fn empty(n_params: usize) -> Self {
        Gradients {
            slots: vec![None; n_params],
        }
    }

    pub fn get(&self, id: ParamId) -> Option<&Tensor<P>> {
        self.slots[id.0].as_ref()
    }

    pub fn slots(&self) -> &[Option<Tensor<P>>] {
        &self.slots
    }

    /// `self += other`, allocating slots on first touch.
    pub fn accumulate(&mut self, other: &Gradients<P>) {
        assert_eq!(self.slots.len(), other.slots.len());
        for (dst, src) in self.slots.iter_mut().zip(&other.slots) {
            let Some(src) = src else { continue };
            match dst {
                Some(d) => {
                    for (a, b) in d.data_mut().iter_mut().zip(src.data()) {
                        *a += *b;
                    }
                }
                None => *dst = Some(src.clone()),
            }
        }
    }

    pub fn scale(&mut self, s: P) {
        for slot in self.slots.iter_mut().flatten() {
            for v in slot.data_mut() {
                *v *= s;
            }
        }
    }

    /// Global L2 norm over all slots, summed in canonical order.
    pub fn global_norm(&self) -> P {
        let mut acc = P::zero();
        for slot in self.slots.iter().flatten() {
            acc += slot.sq_norm();
        }
        acc.sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeId(usize);

enum Op<P> {
    Param(usize),
    Constant,
    MatVec { w: NodeId, x: NodeId },
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Scale(NodeId, P),
    SumSquares(NodeId),
    SqErrAgainst { a: NodeId, target: Tensor<P> },
    LogSoftmaxNll { logits: NodeId, class: usize },
}

struct Node<P> {
    value: Tensor<P>,
    op: Op<P>,
}

pub struct Tape<'p, P> {
    params: &'p ParamSet<P>,
    nodes: Vec<Node<P>>,
    param_nodes: Vec<Option<NodeId>>,
}

impl<'p, P: Real> Tape<'p, P> {
    pub fn new(params: &'p ParamSet<P>) -> Self {
        Tape {
            params,
            nodes: Vec::new(),
            param_nodes: vec![None; params.len()],
        }
    }

    pub fn value(&self, id: NodeId) -> &Tensor<P> {
        &self.nodes[id.0].value
    }

    pub fn params(&self) -> &'p ParamSet<P> {
        self.params
    }

    fn push(&mut self, value: Tensor<P>, op: Op<P>) -> NodeId {
        debug_assert!(
            value.all_finite(),
            "non-finite value produced at node {}",
            self.nodes.len()
        );
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node { value, op });
        id
    }

    /// Leaf node for a parameter; one node per parameter per tape, so every
    /// use shares the same node and gradients accumulate across uses.
    pub fn param(&mut self, id: ParamId) -> NodeId {
        if let Some(n) = self.param_nodes[id.0] {
            return n;
        }
        let n = self.push(self.params.get(id).clone(), Op::Param(id.0));
        self.param_nodes[id.0] = Some(n);
        n
    }

    pub fn constant(&mut self, value: Tensor<P>) -> NodeId {
        self.push(value, Op::Constant)
    }

    /// `W x` for a `[r, c]` matrix node and `[c]` vector node.
    pub fn matvec(&mut self, w: NodeId, x: NodeId) -> Result<NodeId, GradError> {
        let (ws, xs) = (self.value(w).shape(), self.value(x).shape());
        if ws.len() != 2 || xs.len() != 1 || ws[1] != xs[0] {
            return Err(GradError::ShapeMismatch {
                op: "matvec",
                detail: format!("W {:?} vs x {:?}", ws, xs),
            });
        }
        let (rows, cols) = (ws[0], ws[1]);
        let wd = self.value(w).data();
        let xd = self.value(x).data();
        let mut out = vec![P::zero(); rows];
        for i in 0..rows {
            let row = &wd[i * cols..(i + 1) * cols];
            let mut acc = P::zero();
            for (a, b) in row.iter().zip(xd) {
                acc += *a * *b;
            }
            out[i] = acc;
        }
        Ok(self.push(Tensor::vector(out), Op::MatVec { w, x }))
    }

    fn binary(
        &mut self,
        op_name: &'static str,
        a: NodeId,
        b: NodeId,
        f: impl Fn(P, P) -> P,
        op: Op<P>,
    ) -> Result<NodeId, GradError> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(GradError::ShapeMismatch {
                op: op_name,
                detail: format!("{:?} vs {:?}", self.value(a).shape(), self.value(b).shape()),
            });
        }
        let data = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let shape = self.value(a).shape().to_vec();
        Ok(self.push(Tensor::new(shape, data), op))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, GradError> {
        self.binary("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, GradError> {
        self.binary("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, GradError> {
        self.binary("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    fn unary(&mut self, a: NodeId, f: impl Fn(P) -> P, op: Op<P>) -> NodeId {
        let data = self.value(a).data().iter().map(|&x| f(x)).collect();
        let shape = self.value(a).shape().to_vec();
        self.push(Tensor::new(shape, data), op)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        self.unary(a, sigmoid_scalar, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        self.unary(a, |x| x.tanh(), Op::Tanh(a))
    }

    pub fn scale(&mut self, a: NodeId, s: P) -> NodeId {
        self.unary(a, |x| x * s, Op::Scale(a, s))
    }

    /// Scalar `sum(a_i^2)`.
    pub fn sum_squares(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).sq_norm();
        self.push(Tensor::scalar(v), Op::SumSquares(a))
    }

    /// Scalar `sum((a_i - target_i)^2)` against a fixed target.
    pub fn sq_err_against(&mut self, a: NodeId, target: Tensor<P>) -> Result<NodeId, GradError> {
        if self.value(a).shape() != target.shape() {
            return Err(GradError::ShapeMismatch {
                op: "sq_err_against",
                detail: format!("{:?} vs {:?}", self.value(a).shape(), target.shape()),
            });
        }
        let mut acc = P::zero();
        for (&x, &t) in self.value(a).data().iter().zip(target.data()) {
            let d = x - t;
            acc += d * d;
        }
        Ok(self.push(Tensor::scalar(acc), Op::SqErrAgainst { a, target }))
    }

    /// Scalar `-log softmax(logits)[class]`, computed max-subtracted.
    pub fn log_softmax_nll(&mut self, logits: NodeId, class: usize) -> Result<NodeId, GradError> {
        let l = self.value(logits);
        if l.shape().len() != 1 || class >= l.len() {
            return Err(GradError::ShapeMismatch {
                op: "log_softmax_nll",
                detail: format!("logits {:?}, class {}", l.shape(), class),
            });
        }
        let data = l.data();
        let max = data.iter().cloned().fold(P::neg_infinity(), P::max);
        let mut lse = P::zero();
        for &v in data {
            lse += (v - max).exp();
        }
        let loss = lse.ln() + max - data[class];
        Ok(self.push(Tensor::scalar(loss), Op::LogSoftmaxNll { logits, class }))
    }

    /// Exact reverse-mode gradients of the scalar node `loss` with respect to
    /// every parameter recorded on this tape.
    pub fn grad(&self, loss: NodeId) -> Result<Gradients<P>, GradError> {
        let loss_node = &self.nodes[loss.0];
        if !loss_node.value.shape().is_empty() {
            return Err(GradError::NotScalar(loss_node.value.shape().to_vec()));
        }
        // The tape is append-only, so parents must precede children; a
        // violation means the graph was corrupted.
        for (i, node) in self.nodes.iter().enumerate() {
            for p in parent_ids(&node.op) {
                if p.0 >= i {
                    return Err(GradError::GraphCycle(i));
                }
            }
        }

        let mut adjoints: Vec<Option<Tensor<P>>> = (0..self.nodes.len()).map(|_| None).collect();
        adjoints[loss.0] = Some(Tensor::scalar(P::one()));
        let mut grads = Gradients::empty(self.params.len());

        for i in (0..=loss.0).rev() {
            let Some(g) = adjoints[i].take() else { continue };
            match &self.nodes[i].op {
                Op::Param(pid) => match &mut grads.slots[*pid] {
                    Some(acc) => {
                        for (a, b) in acc.data_mut().iter_mut().zip(g.data()) {
                            *a += *b;
                        }
                    }
                    slot @ None => *slot = Some(g),
                },
                Op::Constant => {}
                Op::MatVec { w, x } => {
                    let wd = self.nodes[w.0].value.data();
                    let xd = self.nodes[x.0].value.data();
                    let (rows, cols) = (self.nodes[w.0].value.shape()[0], xd.len());
                    let gd = g.data();
                    {
                        let gw = slot_mut(&mut adjoints, *w, &[rows, cols]);
                        for i in 0..rows {
                            for j in 0..cols {
                                gw[i * cols + j] += gd[i] * xd[j];
                            }
                        }
                    }
                    let gx = slot_mut(&mut adjoints, *x, &[cols]);
                    for i in 0..rows {
                        for j in 0..cols {
                            gx[j] += wd[i * cols + j] * gd[i];
                        }
                    }
                }
                Op::Add(a, b) => {
                    add_into(slot_mut_like(&mut adjoints, *a, &g), g.data(), P::one());
                    add_into(slot_mut_like(&mut adjoints, *b, &g), g.data(), P::one());
                }
                Op::Sub(a, b) => {
                    add_into(slot_mut_like(&mut adjoints, *a, &g), g.data(), P::one());
                    add_into(
                        slot_mut_like(&mut adjoints, *b, &g),
                        g.data(),
                        -P::one(),
                    );
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    {
                        let ga = slot_mut_like(&mut adjoints, *a, &g);
                        for ((d, &gv), &bx) in ga.iter_mut().zip(g.data()).zip(bv.data()) {
                            *d += gv * bx;
                        }
                    }
                    let gb = slot_mut_like(&mut adjoints, *b, &g);
                    for ((d, &gv), &ax) in gb.iter_mut().zip(g.data()).zip(av.data()) {
                        *d += gv * ax;
                    }
                }
                Op::Sigmoid(a) => {
                    let out = &self.nodes[i].value;
                    let ga = slot_mut_like(&mut adjoints, *a, &g);
                    for ((d, &gv), &s) in ga.iter_mut().zip(g.data()).zip(out.data()) {
                        *d += gv * s * (P::one() - s);
                    }
                }
                Op::Tanh(a) => {
                    let out = &self.nodes[i].value;
                    let ga = slot_mut_like(&mut adjoints, *a, &g);
                    for ((d, &gv), &t) in ga.iter_mut().zip(g.data()).zip(out.data()) {
                        *d += gv * (P::one() - t * t);
                    }
                }
                Op::Scale(a, s) => {
                    add_into(slot_mut_like(&mut adjoints, *a, &g), g.data(), *s);
                }
                Op::SumSquares(a) => {
                    let g0 = g.item();
                    let av = &self.nodes[a.0].value;
                    let shape = av.shape().to_vec();
                    let ga = slot_mut(&mut adjoints, *a, &shape);
                    let two = P::one() + P::one();
                    for (d, &x) in ga.iter_mut().zip(av.data()) {
                        *d += two * g0 * x;
                    }
                }
                Op::SqErrAgainst { a, target } => {
                    let g0 = g.item();
                    let av = &self.nodes[a.0].value;
                    let shape = av.shape().to_vec();
                    let ga = slot_mut(&mut adjoints, *a, &shape);
                    let two = P::one() + P::one();
                    for ((d, &x), &t) in ga.iter_mut().zip(av.data()).zip(target.data()) {
                        *d += two * g0 * (x - t);
                    }
                }
                Op::LogSoftmaxNll { logits, class } => {
                    let g0 = g.item();
                    let probs = softmax(self.nodes[logits.0].value.data());
                    let n = probs.len();
                    let gl = slot_mut(&mut adjoints, *logits, &[n]);
                    for (j, (d, p)) in gl.iter_mut().zip(probs).enumerate() {
                        let indicator = if j == *class { P::one() } else { P::zero() };
                        *d += g0 * (p - indicator);
                    }
                }
            }
        }
        Ok(grads)
    }

    #[cfg(test)]
    pub(crate) fn corrupt_for_test(&mut self, at: usize) {
        // Point a node at itself to exercise the cycle guard.
        let id = NodeId(at);
        self.nodes[at].op = Op::Add(id, id);
    }
}

fn parent_ids<P>(op: &Op<P>) -> Vec<NodeId> {
    match op {
        Op::Param(_) | Op::Constant => vec![],
        Op::MatVec { w, x } => vec![*w, *x],
        Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) => vec![*a, *b],
        Op::Sigmoid(a) | Op::Tanh(a) | Op::Scale(a, _) | Op::SumSquares(a) => vec![*a],
        Op::SqErrAgainst { a, .. } => vec![*a],
        Op::LogSoftmaxNll { logits, .. } => vec![*logits],
    }
}

fn slot_mut<'a, P: Real>(
    adjoints: &'a mut [Option<Tensor<P>>],
    id: NodeId,
    shape: &[usize],
) -> &'a mut [P] {
    adjoints[id.0]
        .get_or_insert_with(|| Tensor::zeros(shape))
        .data_mut()
}

fn slot_mut_like<'a, P: Real>(
    adjoints: &'a mut [Option<Tensor<P>>],
    id: NodeId,
    like: &Tensor<P>,
) -> &'a mut [P] {
    let shape = like.shape();
    adjoints[id.0]
        .get_or_insert_with(|| Tensor::zeros(shape))
        .data_mut()
}

fn add_into<P: Real>(dst: &mut [P], src: &[P], scale: P) {
    for (d, &s) in dst.iter_mut().zip(src) {
        *d += s * scale;
    }
}

#[inline]
fn sigmoid_scalar<P: Real>(x: P) -> P {
    P::one() / (P::one() + (-x).exp())
}

/// Numerically stable softmax (max-subtracted). Entries are non-negative and
/// sum to 1 up to rounding for any finite input.
pub fn softmax<P: Real>(v: &[P]) -> Vec<P> {
    let max = v.iter().cloned().fold(P::neg_infinity(), P::max);
    let mut out: Vec<P> = v.iter().map(|&x| (x - max).exp()).collect();
    let denom: P = out.iter().cloned().sum();
    for x in &mut out {
        *x = *x / denom;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grad_of_inner_product_is_2p() {
        // loss = <p, p>  =>  dloss/dp = 2p
        let mut params = ParamSet::<f64>::new();
        let p = params
            .add("p", Tensor::vector(vec![1.0, -2.0, 3.5]))
            .unwrap();
        let mut tape = Tape::new(&params);
        let pn = tape.param(p);
        let loss = tape.sum_squares(pn);
        let grads = tape.grad(loss).unwrap();
        assert_eq!(grads.get(p).unwrap().data(), &[2.0, -4.0, 7.0]);
    }

    #[test]
    fn grad_of_constant_is_zero() {
        let mut params = ParamSet::<f64>::new();
        let p = params.add("p", Tensor::vector(vec![1.0, 2.0])).unwrap();
        let mut tape = Tape::new(&params);
        let c = tape.constant(Tensor::vector(vec![3.0, 4.0]));
        let loss = tape.sum_squares(c);
        let grads = tape.grad(loss).unwrap();
        assert!(grads.get(p).is_none());
    }

    #[test]
    fn param_reuse_accumulates() {
        // loss = sum((p + p)^2) = 4 sum(p^2) => grad = 8p
        let mut params = ParamSet::<f64>::new();
        let p = params.add("p", Tensor::vector(vec![1.0, -1.0])).unwrap();
        let mut tape = Tape::new(&params);
        let pn = tape.param(p);
        let s = tape.add(pn, pn).unwrap();
        let loss = tape.sum_squares(s);
        let grads = tape.grad(loss).unwrap();
        assert_eq!(grads.get(p).unwrap().data(), &[8.0, -8.0]);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut params = ParamSet::<f64>::new();
        let p = params.add("p", Tensor::vector(vec![1.0, 2.0])).unwrap();
        let mut tape = Tape::new(&params);
        let pn = tape.param(p);
        assert!(matches!(tape.grad(pn), Err(GradError::NotScalar(_))));
    }

    #[test]
    fn cycle_guard_fires_on_corrupted_tape() {
        let mut params = ParamSet::<f64>::new();
        let p = params.add("p", Tensor::vector(vec![1.0, 2.0])).unwrap();
        let mut tape = Tape::new(&params);
        let pn = tape.param(p);
        let s = tape.add(pn, pn).unwrap();
        let loss = tape.sum_squares(s);
        tape.corrupt_for_test(1);
        assert!(matches!(tape.grad(loss), Err(GradError::GraphCycle(_))));
    }

    #[test]
    fn shape_mismatch_reported() {
        let mut params = ParamSet::<f64>::new();
        let a = params.add("a", Tensor::vector(vec![1.0, 2.0])).unwrap();
        let b = params.add("b", Tensor::vector(vec![1.0, 2.0, 3.0])).unwrap();
        let mut tape = Tape::new(&params);
        let an = tape.param(a);
        let bn = tape.param(b);
        assert!(matches!(
            tape.add(an, bn),
            Err(GradError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn softmax_uniform_and_shift_invariance() {
        let u = softmax(&[0.25f64, 0.25, 0.25, 0.25]);
        for &p in &u {
            assert!((p - 0.25).abs() < 1e-12);
        }
        let a = softmax(&[0.1f64, -2.0, 3.0]);
        let b = softmax(&[100.1f64, 98.0, 103.0]);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_closed_form() {
        // softmax([0, ln 3]) = [1/4, 3/4]
        let p = softmax(&[0.0f64, 3.0f64.ln()]);
        assert!((p[0] - 0.25).abs() < 1e-12);
        assert!((p[1] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn softmax_extreme_inputs_sum_to_one() {
        for v in [
            vec![1e4f64, -1e4, 0.0],
            vec![-1e4f64, -1e4, -1e4],
            vec![1e4f64; 5],
        ] {
            let p = softmax(&v);
            let sum: f64 = p.iter().sum();
            assert!((sum - 1.0).abs() < 1e-6);
            assert!(p.iter().all(|&x| x >= 0.0));
        }
    }
}
