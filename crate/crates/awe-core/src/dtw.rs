//! Dynamic time warping between two feature sequences, used as a
//! no-training baseline score for word discrimination.
//!
//! The alignment is boundary-anchored with steps (1,0), (0,1), (1,1). With
//! path normalization on (the default) the result is the minimum over all
//! monotone paths of accumulated cost divided by that path's own cell count,
//! computed exactly by a path-length-augmented dynamic program.

use thiserror::Error;

use crate::features::FeatureSequence;

#[derive(Debug, Error)]
pub enum DtwError {
    #[error("feature dimensions differ: {x} vs {y}")]
    DimensionMismatch { x: usize, y: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LocalMetric {
    /// 1 - cosine similarity; a zero-norm frame is at distance 1 from
    /// everything.
    CosineDistance,
    /// Plain L2 distance.
    Euclidean,
}

#[derive(Clone, Debug)]
pub struct DtwConfig {
    pub local_metric: LocalMetric,
    pub normalize_by_path: bool,
}

impl Default for DtwConfig {
    fn default() -> Self {
        DtwConfig {
            local_metric: LocalMetric::CosineDistance,
            normalize_by_path: true,
        }
    }
}

fn local_distance(a: &[f64], b: &[f64], metric: LocalMetric) -> f64 {
    match metric {
        LocalMetric::CosineDistance => {
            let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
            for (&x, &y) in a.iter().zip(b) {
                dot += x * y;
                na += x * x;
                nb += y * y;
            }
            if na == 0.0 || nb == 0.0 {
                1.0
            } else {
                1.0 - dot / (na.sqrt() * nb.sqrt())
            }
        }
        LocalMetric::Euclidean => {
            let mut s = 0.0;
            for (&x, &y) in a.iter().zip(b) {
                let d = x - y;
                s += d * d;
            }
            s.sqrt()
        }
    }
}

/// Alignment cost between `x` and `y` under `cfg`.
pub fn dtw_cost(
    x: &FeatureSequence,
    y: &FeatureSequence,
    cfg: &DtwConfig,
) -> Result<f64, DtwError> {
    if x.dim() != y.dim() {
        return Err(DtwError::DimensionMismatch {
            x: x.dim(),
            y: y.dim(),
        });
    }
    let (n, m) = (x.t(), y.t());
    let mut dist = vec![0.0; n * m];
    for i in 0..n {
        for j in 0..m {
            dist[i * m + j] = local_distance(x.frame(i), y.frame(j), cfg.local_metric);
        }
    }

    if !cfg.normalize_by_path {
        // Classic accumulated-cost recursion.
        let mut acc = vec![f64::INFINITY; n * m];
        for i in 0..n {
            for j in 0..m {
                let d = dist[i * m + j];
                let best = if i == 0 && j == 0 {
                    0.0
                } else {
                    let mut b = f64::INFINITY;
                    if i > 0 {
                        b = b.min(acc[(i - 1) * m + j]);
                    }
                    if j > 0 {
                        b = b.min(acc[i * m + j - 1]);
                    }
                    if i > 0 && j > 0 {
                        b = b.min(acc[(i - 1) * m + j - 1]);
                    }
                    b
                };
                acc[i * m + j] = best + d;
            }
        }
        return Ok(acc[n * m - 1]);
    }

    // Layered recursion over path length: a path reaching (i, j) with L cells
    // extends a path of L-1 cells at one of the three predecessors, so layer
    // L depends only on layer L-1. The per-path normalized cost minimum is
    // then exact, not the normalized minimum of the unnormalized optimum.
    let max_len = n + m - 1;
    let mut prev = vec![f64::INFINITY; n * m];
    let mut best = f64::INFINITY;
    prev[0] = dist[0];
    if n == 1 && m == 1 {
        return Ok(dist[0]);
    }
    let mut cur = vec![f64::INFINITY; n * m];
    for len in 2..=max_len {
        for v in cur.iter_mut() {
            *v = f64::INFINITY;
        }
        for i in 0..n {
            for j in 0..m {
                if i == 0 && j == 0 {
                    continue;
                }
                let mut b = f64::INFINITY;
                if i > 0 {
                    b = b.min(prev[(i - 1) * m + j]);
                }
                if j > 0 {
                    b = b.min(prev[i * m + j - 1]);
                }
                if i > 0 && j > 0 {
                    b = b.min(prev[(i - 1) * m + j - 1]);
                }
                if b.is_finite() {
                    cur[i * m + j] = b + dist[i * m + j];
                }
            }
        }
        let end = cur[n * m - 1];
        if end.is_finite() {
            best = best.min(end / len as f64);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn seq(rows: &[Vec<f64>]) -> FeatureSequence {
        FeatureSequence::from_rows(rows, 0.01)
    }

    fn random_seq(rng: &mut ChaCha8Rng, t: usize, d: usize) -> FeatureSequence {
        let rows: Vec<Vec<f64>> = (0..t)
            .map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        seq(&rows)
    }

    #[test]
    fn identical_sequences_cost_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_seq(&mut rng, 5, 3);
        for metric in [LocalMetric::CosineDistance, LocalMetric::Euclidean] {
            for normalize in [true, false] {
                let cfg = DtwConfig {
                    local_metric: metric,
                    normalize_by_path: normalize,
                };
                let c = dtw_cost(&x, &x, &cfg).unwrap();
                assert!(c.abs() < 1e-12, "{metric:?} normalize={normalize}: {c}");
            }
        }
    }

    #[test]
    fn single_frames_reduce_to_local_distance() {
        let x = seq(&[vec![1.0, 0.0]]);
        let y = seq(&[vec![0.0, 1.0]]);
        let cos = dtw_cost(&x, &y, &DtwConfig::default()).unwrap();
        assert!((cos - 1.0).abs() < 1e-12); // orthogonal frames
        let eu = dtw_cost(
            &x,
            &y,
            &DtwConfig {
                local_metric: LocalMetric::Euclidean,
                normalize_by_path: false,
            },
        )
        .unwrap();
        assert!((eu - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn symmetry_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..30 {
            let (tx, ty) = (rng.gen_range(1..8), rng.gen_range(1..8));
            let x = random_seq(&mut rng, tx, 4);
            let y = random_seq(&mut rng, ty, 4);
            for normalize in [true, false] {
                let cfg = DtwConfig {
                    local_metric: LocalMetric::CosineDistance,
                    normalize_by_path: normalize,
                };
                let a = dtw_cost(&x, &y, &cfg).unwrap();
                let b = dtw_cost(&y, &x, &cfg).unwrap();
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn costs_are_nonnegative() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..30 {
            let (tx, ty) = (rng.gen_range(1..7), rng.gen_range(1..7));
            let x = random_seq(&mut rng, tx, 3);
            let y = random_seq(&mut rng, ty, 3);
            let c = dtw_cost(
                &x,
                &y,
                &DtwConfig {
                    local_metric: LocalMetric::Euclidean,
                    normalize_by_path: true,
                },
            )
            .unwrap();
            assert!(c >= 0.0);
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let x = seq(&[vec![1.0, 2.0]]);
        let y = seq(&[vec![1.0]]);
        assert!(matches!(
            dtw_cost(&x, &y, &DtwConfig::default()),
            Err(DtwError::DimensionMismatch { x: 2, y: 1 })
        ));
    }

    #[test]
    fn stretched_sequence_aligns_cheaply_under_euclidean() {
        // y repeats each frame of x: the warp should absorb the stretch.
        let x = seq(&[vec![0.0], vec![1.0], vec![2.0]]);
        let y = seq(&[
            vec![0.0],
            vec![0.0],
            vec![1.0],
            vec![1.0],
            vec![2.0],
            vec![2.0],
        ]);
        let cfg = DtwConfig {
            local_metric: LocalMetric::Euclidean,
            normalize_by_path: true,
        };
        let c = dtw_cost(&x, &y, &cfg).unwrap();
        assert!(c.abs() < 1e-12);
    }
}
