//! The same-different word discrimination evaluation: score every unordered
//! pair of word segments (cosine distance between embeddings, or DTW cost),
//! sweep a threshold over the ranking, and report average precision.
//!
//! Average precision here is the interpolation-free ranked-retrieval form:
//! the mean of precision at the rank of each positive pair, with pairs sorted
//! by ascending score and ties broken by pair id. This equals the area under
//! the precision-recall curve with step interpolation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dtw::{dtw_cost, DtwConfig, DtwError};
use crate::features::FeatureSequence;

#[derive(Debug, Error)]
pub enum SameDiffError {
    #[error("need at least two items, got {0}")]
    TooFew(usize),
    #[error("no positive pairs under mode {0:?}")]
    NoPositivePairs(EvalMode),
    #[error("non-finite score for pair ({i}, {j})")]
    NonFiniteScore { i: usize, j: usize },
    #[error(transparent)]
    Dtw(#[from] DtwError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

/// What counts as a positive pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EvalMode {
    /// Same word type, any speakers.
    All,
    /// Same word type spoken by different speakers.
    Swdp,
}

/// One unordered pair with its distance score. Lower score means the two
/// segments look more alike.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoredPair {
    pub i: usize,
    pub j: usize,
    pub score: f64,
    pub same_word: bool,
    pub same_speaker: bool,
}

impl ScoredPair {
    fn is_positive(&self, mode: EvalMode) -> bool {
        match mode {
            EvalMode::All => self.same_word,
            EvalMode::Swdp => self.same_word && !self.same_speaker,
        }
    }
}

/// An embedding with the labels the evaluation needs.
#[derive(Clone, Debug)]
pub struct LabeledEmbedding {
    pub vector: Vec<f64>,
    pub word_type: String,
    pub speaker: String,
}

/// A feature sequence with the labels the evaluation needs (DTW baseline).
#[derive(Clone, Debug)]
pub struct LabeledSequence {
    pub features: FeatureSequence,
    pub word_type: String,
    pub speaker: String,
}

/// All unordered pair scores plus the indices of any zero-norm embeddings
/// encountered (their pairs are scored 1.0).
#[derive(Clone, Debug)]
pub struct PairwiseScores {
    pub pairs: Vec<ScoredPair>,
    pub zero_vectors: Vec<usize>,
}

/// Cosine distance 1 - <a,b>/(|a||b|) for every unordered pair, in (i, j)
/// order with i < j.
pub fn pairwise_cosine(items: &[LabeledEmbedding]) -> Result<PairwiseScores, SameDiffError> {
    if items.len() < 2 {
        return Err(SameDiffError::TooFew(items.len()));
    }
    let norms: Vec<f64> = items
        .iter()
        .map(|e| e.vector.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let zero_vectors: Vec<usize> = norms
        .iter()
        .enumerate()
        .filter(|(_, &n)| n == 0.0)
        .map(|(i, _)| i)
        .collect();
    let n = items.len();
    let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let score = if norms[i] == 0.0 || norms[j] == 0.0 {
                1.0
            } else {
                let dot: f64 = items[i]
                    .vector
                    .iter()
                    .zip(&items[j].vector)
                    .map(|(a, b)| a * b)
                    .sum();
                1.0 - dot / (norms[i] * norms[j])
            };
            pairs.push(ScoredPair {
                i,
                j,
                score,
                same_word: items[i].word_type == items[j].word_type,
                same_speaker: items[i].speaker == items[j].speaker,
            });
        }
    }
    Ok(PairwiseScores {
        pairs,
        zero_vectors,
    })
}

/// One point of the precision-recall sweep; `threshold` is the score at this
/// rank (pairs scored <= threshold are accepted).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalReport {
    pub ap: f64,
    pub n_pairs: usize,
    pub n_positive: usize,
    pub mode: EvalMode,
    /// How equal scores were ordered.
    pub tie_break: String,
    pub pr: Vec<PrPoint>,
}

/// Rank `pairs` by ascending score (ties by pair id) and compute average
/// precision over positives under `mode`.
pub fn average_precision(
    pairs: &[ScoredPair],
    mode: EvalMode,
) -> Result<EvalReport, SameDiffError> {
    for p in pairs {
        if !p.score.is_finite() {
            return Err(SameDiffError::NonFiniteScore { i: p.i, j: p.j });
        }
    }
    let n_positive = pairs.iter().filter(|p| p.is_positive(mode)).count();
    if n_positive == 0 {
        return Err(SameDiffError::NoPositivePairs(mode));
    }
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.sort_unstable_by(|&a, &b| {
        pairs[a]
            .score
            .total_cmp(&pairs[b].score)
            .then_with(|| (pairs[a].i, pairs[a].j).cmp(&(pairs[b].i, pairs[b].j)))
    });
    let mut tp = 0usize;
    let mut precision_sum = 0.0;
    let mut pr = Vec::with_capacity(pairs.len());
    for (rank0, &idx) in order.iter().enumerate() {
        let rank = rank0 + 1;
        if pairs[idx].is_positive(mode) {
            tp += 1;
            precision_sum += tp as f64 / rank as f64;
        }
        pr.push(PrPoint {
            threshold: pairs[idx].score,
            precision: tp as f64 / rank as f64,
            recall: tp as f64 / n_positive as f64,
        });
    }
    Ok(EvalReport {
        ap: precision_sum / n_positive as f64,
        n_pairs: pairs.len(),
        n_positive,
        mode,
        tie_break: "score_then_pair_id".to_string(),
        pr,
    })
}

/// Embed-and-evaluate: cosine distances over all pairs, then AP.
pub fn same_different_eval(
    items: &[LabeledEmbedding],
    mode: EvalMode,
) -> Result<EvalReport, SameDiffError> {
    let scores = pairwise_cosine(items)?;
    average_precision(&scores.pairs, mode)
}

/// DTW baseline: alignment cost as the pair score, then AP. Pair scoring
/// runs in parallel; results are collected in pair-index order so the
/// ranking is deterministic.
pub fn same_different_eval_dtw(
    items: &[LabeledSequence],
    cfg: &DtwConfig,
    mode: EvalMode,
) -> Result<EvalReport, SameDiffError> {
    if items.len() < 2 {
        return Err(SameDiffError::TooFew(items.len()));
    }
    let n = items.len();
    let index_pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let pairs: Vec<ScoredPair> = index_pairs
        .par_iter()
        .map(|&(i, j)| {
            let score = dtw_cost(&items[i].features, &items[j].features, cfg)?;
            Ok(ScoredPair {
                i,
                j,
                score,
                same_word: items[i].word_type == items[j].word_type,
                same_speaker: items[i].speaker == items[j].speaker,
            })
        })
        .collect::<Result<_, DtwError>>()?;
    average_precision(&pairs, mode)
}

pub fn write_report_json(path: &std::path::Path, report: &EvalReport) -> Result<(), SameDiffError> {
    let json = serde_json::to_string_pretty(report)?;
    std::fs::write(path, json)?;
    Ok(())
}

/// threshold,precision,recall rows for plotting.
pub fn write_pr_csv(path: &std::path::Path, report: &EvalReport) -> Result<(), SameDiffError> {
    use std::fmt::Write as _;
    let mut csv = String::from("threshold,precision,recall\n");
    for p in &report.pr {
        writeln!(csv, "{},{},{}", p.threshold, p.precision, p.recall).expect("writing to string");
    }
    std::fs::write(path, csv)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pair(i: usize, j: usize, score: f64, same_word: bool) -> ScoredPair {
        ScoredPair {
            i,
            j,
            score,
            same_word,
            same_speaker: false,
        }
    }

    fn emb(v: Vec<f64>, word: &str, speaker: &str) -> LabeledEmbedding {
        LabeledEmbedding {
            vector: v,
            word_type: word.to_string(),
            speaker: speaker.to_string(),
        }
    }

    #[test]
    fn cosine_identical_and_orthogonal() {
        let items = vec![
            emb(vec![1.0, 0.0], "a", "s1"),
            emb(vec![2.0, 0.0], "a", "s2"),
            emb(vec![0.0, 3.0], "b", "s1"),
        ];
        let scores = pairwise_cosine(&items).unwrap();
        assert_eq!(scores.pairs.len(), 3);
        assert!(scores.pairs[0].score.abs() < 1e-15); // parallel vectors
        assert!((scores.pairs[1].score - 1.0).abs() < 1e-15); // orthogonal
        assert!(scores.zero_vectors.is_empty());
    }

    #[test]
    fn zero_vectors_reported_and_scored_one() {
        let items = vec![
            emb(vec![0.0, 0.0], "a", "s1"),
            emb(vec![1.0, 0.0], "a", "s2"),
        ];
        let scores = pairwise_cosine(&items).unwrap();
        assert_eq!(scores.zero_vectors, vec![0]);
        assert_eq!(scores.pairs[0].score, 1.0);
    }

    #[test]
    fn pair_count_is_n_choose_2() {
        let items: Vec<LabeledEmbedding> = (0..20)
            .map(|i| emb(vec![i as f64 + 1.0, 1.0], "w", "s"))
            .collect();
        assert_eq!(pairwise_cosine(&items).unwrap().pairs.len(), 190);
    }

    #[test]
    fn perfect_ranking_gives_ap_one() {
        let pairs = vec![
            pair(0, 1, 0.1, true),
            pair(0, 2, 0.2, true),
            pair(1, 2, 0.9, false),
        ];
        let r = average_precision(&pairs, EvalMode::All).unwrap();
        assert_eq!(r.ap, 1.0);
        assert_eq!((r.n_pairs, r.n_positive), (3, 2));
    }

    #[test]
    fn same_diff_same_ranking_hand_value() {
        // precision at the positives' ranks: 1/1 and 2/3; AP = 5/6.
        let pairs = vec![
            pair(0, 1, 0.1, true),
            pair(0, 2, 0.2, false),
            pair(1, 2, 0.3, true),
        ];
        let r = average_precision(&pairs, EvalMode::All).unwrap();
        assert!((r.ap - 5.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn single_positive_ranked_second_gives_half() {
        let pairs = vec![pair(0, 1, 0.1, false), pair(0, 2, 0.5, true)];
        let r = average_precision(&pairs, EvalMode::All).unwrap();
        assert!((r.ap - 0.5).abs() < 1e-12);
    }

    #[test]
    fn no_positive_pairs_is_an_error() {
        let pairs = vec![pair(0, 1, 0.1, false)];
        assert!(matches!(
            average_precision(&pairs, EvalMode::All),
            Err(SameDiffError::NoPositivePairs(EvalMode::All))
        ));
    }

    #[test]
    fn swdp_ignores_same_speaker_positives() {
        let mut p1 = pair(0, 1, 0.1, true);
        p1.same_speaker = true;
        let p2 = pair(0, 2, 0.2, true); // different speakers
        let r = average_precision(&[p1.clone(), p2], EvalMode::Swdp).unwrap();
        assert_eq!(r.n_positive, 1);
        assert!(matches!(
            average_precision(&[p1], EvalMode::Swdp),
            Err(SameDiffError::NoPositivePairs(EvalMode::Swdp))
        ));
    }

    #[test]
    fn ap_invariant_under_monotone_transform() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let pairs: Vec<ScoredPair> = (0..40)
                .map(|k| {
                    pair(
                        k / 8,
                        8 + k % 8,
                        rng.gen_range(0.0..2.0),
                        rng.gen_bool(0.3),
                    )
                })
                .collect();
            if !pairs.iter().any(|p| p.same_word) {
                continue;
            }
            let base = average_precision(&pairs, EvalMode::All).unwrap().ap;
            let transformed: Vec<ScoredPair> = pairs
                .iter()
                .map(|p| ScoredPair {
                    score: p.score.powi(3) + 2.0 * p.score + 1.0,
                    ..p.clone()
                })
                .collect();
            let t = average_precision(&transformed, EvalMode::All).unwrap().ap;
            assert!((base - t).abs() < 1e-15);
        }
    }

    #[test]
    fn random_ranking_ap_concentrates_near_positive_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let n = 1000;
        let n_pos = 200;
        let mut aps = Vec::new();
        for _ in 0..100 {
            let mut scores: Vec<f64> = (0..n).map(|k| k as f64 / n as f64).collect();
            scores.shuffle(&mut rng);
            let pairs: Vec<ScoredPair> = scores
                .iter()
                .enumerate()
                .map(|(k, &s)| pair(0, k + 1, s, k < n_pos))
                .collect();
            aps.push(average_precision(&pairs, EvalMode::All).unwrap().ap);
        }
        let mean: f64 = aps.iter().sum::<f64>() / aps.len() as f64;
        let var: f64 =
            aps.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / (aps.len() - 1) as f64;
        let se = (var / aps.len() as f64).sqrt();
        let expected = n_pos as f64 / n as f64;
        // Small upward allowance: the exact mean of random-ranking AP sits
        // slightly above P/n at finite n.
        assert!(
            (mean - expected).abs() <= 3.0 * se + 0.002,
            "mean {mean} vs {expected} (se {se})"
        );
    }

    #[test]
    fn pr_curve_ends_at_full_recall() {
        let pairs = vec![
            pair(0, 1, 0.3, true),
            pair(0, 2, 0.1, false),
            pair(1, 2, 0.2, true),
        ];
        let r = average_precision(&pairs, EvalMode::All).unwrap();
        assert_eq!(r.pr.len(), 3);
        assert_eq!(r.pr.last().unwrap().recall, 1.0);
    }

    #[test]
    fn eval_is_deterministic_and_separates_constructed_words() {
        // Two well-separated word clusters, two instances each.
        let items = vec![
            emb(vec![1.0, 0.01], "x", "s1"),
            emb(vec![1.0, -0.01], "x", "s2"),
            emb(vec![0.01, 1.0], "y", "s1"),
            emb(vec![-0.01, 1.0], "y", "s2"),
        ];
        let a = same_different_eval(&items, EvalMode::All).unwrap();
        let b = same_different_eval(&items, EvalMode::All).unwrap();
        assert_eq!(a.ap, 1.0);
        assert!((a.ap - b.ap).abs() < 1e-10);
    }

    #[test]
    fn dtw_eval_matches_embedding_schema() {
        let mk = |rows: &[Vec<f64>], w: &str, s: &str| LabeledSequence {
            features: FeatureSequence::from_rows(rows, 0.01),
            word_type: w.to_string(),
            speaker: s.to_string(),
        };
        let items = vec![
            mk(&[vec![1.0, 0.0], vec![1.0, 0.1]], "x", "s1"),
            mk(&[vec![1.0, 0.05]], "x", "s2"),
            mk(&[vec![0.0, 1.0], vec![0.1, 1.0]], "y", "s1"),
            mk(&[vec![0.05, 1.0]], "y", "s2"),
        ];
        let r =
            same_different_eval_dtw(&items, &DtwConfig::default(), EvalMode::All).unwrap();
        assert_eq!(r.n_pairs, 6);
        assert_eq!(r.n_positive, 2);
        assert_eq!(r.ap, 1.0);
    }

    #[test]
    fn report_serializes_roundtrip() {
        let pairs = vec![pair(0, 1, 0.25, true), pair(0, 2, 0.75, false)];
        let r = average_precision(&pairs, EvalMode::All).unwrap();
        let json = serde_json::to_string(&r).unwrap();
        let back: EvalReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back.ap, r.ap);
        assert_eq!(back.mode, EvalMode::All);
        assert_eq!(back.pr.len(), r.pr.len());
    }
}
