//! Central finite-difference gradients, used as an independent oracle for the
//! tape. Built only from repeated forward evaluations, so it shares no code
//! with the reverse pass.

use super::real::Real;
use super::tape::{Gradients, ParamSet};
use super::tensor::Tensor;

/// Numeric gradient of `loss` with respect to every scalar in `params`,
/// by central differences with step `h`: (f(x+h) - f(x-h)) / 2h.
///
/// `params` is restored to its original values before returning.
pub fn finite_difference_gradients<P: Real>(
    params: &mut ParamSet<P>,
    mut loss: impl FnMut(&ParamSet<P>) -> P,
    h: P,
) -> Vec<Tensor<P>> {
    let shapes: Vec<Vec<usize>> = params.iter().map(|(_, t)| t.shape().to_vec()).collect();
    let mut out: Vec<Tensor<P>> = shapes.iter().map(|s| Tensor::zeros(s)).collect();
    let two = P::one() + P::one();
    for pi in 0..out.len() {
        for k in 0..out[pi].len() {
            let orig = nth_scalar(params, pi, k);
            set_nth_scalar(params, pi, k, orig + h);
            let up = loss(params);
            set_nth_scalar(params, pi, k, orig - h);
            let down = loss(params);
            set_nth_scalar(params, pi, k, orig);
            out[pi].data_mut()[k] = (up - down) / (two * h);
        }
    }
    out
}

fn nth_scalar<P: Real>(params: &ParamSet<P>, pi: usize, k: usize) -> P {
    params.iter().nth(pi).unwrap().1.data()[k]
}

fn set_nth_scalar<P: Real>(params: &mut ParamSet<P>, pi: usize, k: usize, v: P) {
    params.iter_mut().nth(pi).unwrap().1.data_mut()[k] = v;
}

/// Worst relative disagreement between analytic and numeric gradients:
/// max over scalars of |a - n| / max(|a|, |n|, floor).
///
/// The floor keeps near-zero entries from dominating; with 64-bit central
/// differences the numeric error on such entries is far below any floor a
/// caller would pass.
pub fn max_relative_error<P: Real>(
    analytic: &Gradients<P>,
    numeric: &[Tensor<P>],
    floor: P,
) -> P {
    let mut worst = P::zero();
    for (slot, num) in analytic.slots().iter().zip(numeric) {
        for (i, &n) in num.data().iter().enumerate() {
            let a = slot.as_ref().map_or(P::zero(), |t| t.data()[i]);
            let denom = a.abs().max(n.abs()).max(floor);
            let rel = (a - n).abs() / denom;
            if rel > worst {
                worst = rel;
            }
        }
    }
    worst
}
