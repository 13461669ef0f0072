//! Checks pairwise cosine scoring and average precision against a standalone
//! brute-force reference on randomized instances.

use awe_core::samediff::{average_precision, pairwise_cosine, EvalMode, LabeledEmbedding};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Reference scorer: normalize first, then dot products in a double loop.
fn reference_cosine(items: &[LabeledEmbedding]) -> Vec<(usize, usize, f64)> {
    let unit: Vec<Option<Vec<f64>>> = items
        .iter()
        .map(|e| {
            let norm = e.vector.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                None
            } else {
                Some(e.vector.iter().map(|v| v / norm).collect())
            }
        })
        .collect();
    let mut out = Vec::new();
    for i in 0..items.len() {
        for j in i + 1..items.len() {
            let score = match (&unit[i], &unit[j]) {
                (Some(a), Some(b)) => {
                    1.0 - a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
                }
                _ => 1.0,
            };
            out.push((i, j, score));
        }
    }
    out
}

/// Reference AP: sort (score, i, j) ascending, list the precision at each
/// positive's rank, then average the list.
fn reference_ap(scored: &[(usize, usize, f64, bool)]) -> f64 {
    let mut ranked: Vec<&(usize, usize, f64, bool)> = scored.iter().collect();
    ranked.sort_by(|a, b| a.2.total_cmp(&b.2).then_with(|| (a.0, a.1).cmp(&(b.0, b.1))));
    let mut precisions = Vec::new();
    let mut seen_pos = 0usize;
    for (rank0, entry) in ranked.iter().enumerate() {
        if entry.3 {
            seen_pos += 1;
            precisions.push(seen_pos as f64 / (rank0 + 1) as f64);
        }
    }
    precisions.iter().sum::<f64>() / precisions.len() as f64
}

fn random_items(rng: &mut ChaCha8Rng, n: usize) -> Vec<LabeledEmbedding> {
    let dim = rng.gen_range(3..16);
    let n_words = rng.gen_range(2..8);
    (0..n)
        .map(|_| {
            let w = rng.gen_range(0..n_words);
            LabeledEmbedding {
                vector: (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                word_type: format!("w{w}"),
                speaker: format!("s{}", rng.gen_range(0..4)),
            }
        })
        .collect()
}

#[test]
fn cosine_scores_match_double_loop_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(200);
    let items = random_items(&mut rng, 200);
    let fast = pairwise_cosine(&items).unwrap();
    let slow = reference_cosine(&items);
    assert_eq!(fast.pairs.len(), slow.len());
    for (p, (i, j, score)) in fast.pairs.iter().zip(&slow) {
        assert_eq!((p.i, p.j), (*i, *j));
        assert!(
            (p.score - score).abs() < 1e-12,
            "pair ({i},{j}): {} vs {score}",
            p.score
        );
    }
}

#[test]
fn average_precision_is_bit_equal_to_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(201);
    for case in 0..100 {
        let n = rng.gen_range(2..=300);
        let items = random_items(&mut rng, n);
        let scores = pairwise_cosine(&items).unwrap();
        if !scores.pairs.iter().any(|p| p.same_word) {
            continue;
        }
        let fast = average_precision(&scores.pairs, EvalMode::All).unwrap();
        let flat: Vec<(usize, usize, f64, bool)> = scores
            .pairs
            .iter()
            .map(|p| (p.i, p.j, p.score, p.same_word))
            .collect();
        let slow = reference_ap(&flat);
        assert_eq!(fast.ap, slow, "case {case} with {n} embeddings");
    }
}

#[test]
fn average_precision_handles_heavy_ties_identically() {
    // Quantized scores force many exact ties; the shared tie rule must leave
    // both computations identical.
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    for _ in 0..20 {
        let n = rng.gen_range(10..80);
        let pairs: Vec<(usize, usize, f64, bool)> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| (i, j, 0.0, false))
            .collect();
        let mut scored = Vec::new();
        for (i, j, _, _) in pairs {
            scored.push(awe_core::samediff::ScoredPair {
                i,
                j,
                score: rng.gen_range(0..4) as f64 * 0.25,
                same_word: rng.gen_bool(0.4),
                same_speaker: false,
            });
        }
        if !scored.iter().any(|p| p.same_word) {
            continue;
        }
        let fast = average_precision(&scored, EvalMode::All).unwrap();
        let flat: Vec<(usize, usize, f64, bool)> = scored
            .iter()
            .map(|p| (p.i, p.j, p.score, p.same_word))
            .collect();
        assert_eq!(fast.ap, reference_ap(&flat));
    }
}
