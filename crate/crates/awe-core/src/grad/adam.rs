//! Adam with bias correction, plus global-norm gradient clipping.

use super::real::Real;
use super::tape::{GradError, Gradients, ParamSet};
use super::tensor::Tensor;

#[derive(Clone, Debug)]
pub struct AdamState<P> {
    m: Vec<Tensor<P>>,
    v: Vec<Tensor<P>>,
    pub step: u64,
    pub lr: P,
    pub beta1: P,
    pub beta2: P,
    pub eps: P,
}

impl<P: Real> AdamState<P> {
    /// Zero moments shaped like `params`; defaults lr 0.001, beta1 0.9,
    /// beta2 0.999, eps 1e-8.
    pub fn new(params: &ParamSet<P>, lr: f64) -> Self {
        let zeros: Vec<Tensor<P>> = params.iter().map(|(_, t)| Tensor::zeros(t.shape())).collect();
        AdamState {
            m: zeros.clone(),
            v: zeros,
            step: 0,
            lr: P::from_f64(lr),
            beta1: P::from_f64(0.9),
            beta2: P::from_f64(0.999),
            eps: P::from_f64(1e-8),
        }
    }
}

/// One Adam update over every parameter, in canonical order. Gradient slots
/// that were never touched count as zero (their moments still decay).
pub fn adam_step<P: Real>(
    params: &mut ParamSet<P>,
    grads: &Gradients<P>,
    state: &mut AdamState<P>,
) -> Result<(), GradError> {
    if grads.slots().len() != state.m.len() || params.len() != state.m.len() {
        return Err(GradError::ShapeMismatch {
            op: "adam_step",
            detail: format!(
                "{} params, {} grad slots, {} moment slots",
                params.len(),
                grads.slots().len(),
                state.m.len()
            ),
        });
    }
    state.step += 1;
    let t = state.step as i32;
    let corr1 = P::one() - state.beta1.powi(t);
    let corr2 = P::one() - state.beta2.powi(t);
    let one = P::one();
    for (pi, (_, tensor)) in params.iter_mut().enumerate() {
        let grad = grads.slots()[pi].as_ref();
        if let Some(g) = grad {
            if g.shape() != tensor.shape() {
                return Err(GradError::ShapeMismatch {
                    op: "adam_step",
                    detail: format!("grad {:?} vs param {:?}", g.shape(), tensor.shape()),
                });
            }
        }
        let m = state.m[pi].data_mut();
        let v = state.v[pi].data_mut();
        for (k, p) in tensor.data_mut().iter_mut().enumerate() {
            let g = grad.map_or(P::zero(), |t| t.data()[k]);
            m[k] = state.beta1 * m[k] + (one - state.beta1) * g;
            v[k] = state.beta2 * v[k] + (one - state.beta2) * g * g;
            let m_hat = m[k] / corr1;
            let v_hat = v[k] / corr2;
            *p = *p - state.lr * m_hat / (v_hat.sqrt() + state.eps);
        }
    }
    Ok(())
}

/// Scale gradients down so their global L2 norm is at most `max_norm`.
pub fn clip_global_norm<P: Real>(grads: &mut Gradients<P>, max_norm: P) {
    let norm = grads.global_norm();
    if norm > max_norm && norm > P::zero() {
        grads.scale(max_norm / norm);
    }
}
