//! Sampling ground-truth training pairs.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CorpusError, PairList, PairSource, WordSegment};

/// Result of [`sample_true_pairs`]: the pairs plus how many existed, so
/// callers can tell when the request exhausted the supply.
#[derive(Clone, Debug)]
pub struct TruePairSample {
    pub list: PairList,
    pub available: u64,
    pub requested: usize,
}

/// Draw `n` pairs uniformly without replacement from all unordered pairs of
/// same-language, same-word-type segments. If fewer than `n` pairs exist,
/// every pair is returned (in canonical group order); otherwise pairs appear
/// in draw order, deterministic for a given seed.
pub fn sample_true_pairs(
    segments: &[WordSegment],
    n: usize,
    seed: u64,
) -> Result<TruePairSample, CorpusError> {
    // Group labeled segments by (language, word type); sorted keys make the
    // pair indexing canonical.
    let mut groups: BTreeMap<(&str, &str), Vec<usize>> = BTreeMap::new();
    for (i, s) in segments.iter().enumerate() {
        if let Some(w) = &s.word_type {
            groups
                .entry((s.language.as_str(), w.as_str()))
                .or_default()
                .push(i);
        }
    }
    let groups: Vec<&Vec<usize>> = groups.values().filter(|g| g.len() >= 2).collect();
    let counts: Vec<u64> = groups
        .iter()
        .map(|g| (g.len() as u64) * (g.len() as u64 - 1) / 2)
        .collect();
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(CorpusError::NoPairsAvailable);
    }

    let pair_at = |mut idx: u64| -> (usize, usize) {
        let mut g = 0;
        while idx >= counts[g] {
            idx -= counts[g];
            g += 1;
        }
        let members = groups[g];
        let m = members.len() as u64;
        let mut a = 0u64;
        let mut local = idx;
        while local >= m - 1 - a {
            local -= m - 1 - a;
            a += 1;
        }
        let b = a + 1 + local;
        (members[a as usize], members[b as usize])
    };

    let picked: Vec<u64> = if n as u64 >= total {
        (0..total).collect()
    } else {
        // Partial Fisher-Yates over the virtual index range, storing only
        // displaced entries.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut swapped: HashMap<u64, u64> = HashMap::new();
        let mut out = Vec::with_capacity(n);
        for i in 0..n as u64 {
            let j = rng.gen_range(i..total);
            let vj = *swapped.get(&j).unwrap_or(&j);
            let vi = *swapped.get(&i).unwrap_or(&i);
            out.push(vj);
            swapped.insert(j, vi);
        }
        out
    };

    let pairs = picked
        .into_iter()
        .map(|idx| {
            let (a, b) = pair_at(idx);
            (segments[a].segment_id.clone(), segments[b].segment_id.clone())
        })
        .collect();
    Ok(TruePairSample {
        list: PairList {
            pairs,
            source: PairSource::True,
        },
        available: total,
        requested: n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn seg(utt: &str, word: Option<&str>, lang: &str) -> WordSegment {
        WordSegment::new(utt, 0, 4, word, lang, "spk").unwrap()
    }

    fn demo_corpus() -> Vec<WordSegment> {
        let mut out = Vec::new();
        for (w, count) in [("uno", 4), ("dos", 3), ("tres", 2), ("solo", 1)] {
            for i in 0..count {
                out.push(seg(&format!("{w}{i}"), Some(w), "ES"));
            }
        }
        for i in 0..3 {
            out.push(seg(&format!("yi{i}"), Some("yi"), "ZH"));
        }
        out.push(seg("und0", None, "DE"));
        out
    }

    fn label_of(segments: &[WordSegment], id: &str) -> (String, String) {
        let s = segments.iter().find(|s| s.segment_id == id).unwrap();
        (s.language.clone(), s.word_type.clone().unwrap())
    }

    #[test]
    fn exhausts_all_pairs_when_request_exceeds_supply() {
        let segs: Vec<_> = (0..3).map(|i| seg(&format!("u{i}"), Some("w"), "L")).collect();
        let sample = sample_true_pairs(&segs, 10, 0).unwrap();
        assert_eq!(sample.available, 3);
        assert_eq!(sample.list.len(), 3);
        let set: HashSet<_> = sample.list.pairs.iter().collect();
        assert_eq!(set.len(), 3);
    }

    #[test]
    fn pairs_are_same_type_distinct_and_unique() {
        let segs = demo_corpus();
        let sample = sample_true_pairs(&segs, 8, 7).unwrap();
        assert_eq!(sample.list.len(), 8);
        // 4C2 + 3C2 + 2C2 + 3C2 = 6 + 3 + 1 + 3
        assert_eq!(sample.available, 13);
        let mut seen = HashSet::new();
        for (a, b) in &sample.list.pairs {
            assert_ne!(a, b);
            assert_eq!(label_of(&segs, a), label_of(&segs, b));
            assert!(seen.insert((a.clone(), b.clone())), "duplicate pair drawn");
        }
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let segs = demo_corpus();
        let a = sample_true_pairs(&segs, 6, 42).unwrap();
        let b = sample_true_pairs(&segs, 6, 42).unwrap();
        assert_eq!(a.list, b.list);
        let c = sample_true_pairs(&segs, 6, 43).unwrap();
        assert_ne!(a.list, c.list);
    }

    #[test]
    fn no_repeatable_type_errors() {
        let segs = vec![seg("u0", Some("a"), "L"), seg("u1", Some("b"), "L")];
        assert!(matches!(
            sample_true_pairs(&segs, 5, 0),
            Err(CorpusError::NoPairsAvailable)
        ));
    }

    #[test]
    fn single_draws_cover_the_pair_space() {
        let segs = demo_corpus(); // 13 possible pairs
        let mut seen = HashSet::new();
        for seed in 0..300 {
            let s = sample_true_pairs(&segs, 1, seed).unwrap();
            seen.insert(s.list.pairs[0].clone());
        }
        assert_eq!(seen.len(), 13, "uniform sampling should reach every pair");
    }
}
