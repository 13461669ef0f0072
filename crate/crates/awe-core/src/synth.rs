//! Synthetic languages for desk-scale experiments: each word type is a
//! smooth template trajectory, and instances vary it through exactly the
//! nuisance factors an embedding should shrug off — monotone time warping,
//! a per-speaker constant offset and additive noise. A family knob derives
//! related languages from a parent so cross-lingual transfer is measurable.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{
    sample_true_pairs, CorpusError, FeatureArchive, PairList, PairSource, WordSegment,
};
use crate::features::FeatureSequence;

/// Frame shift stamped on generated sequences, matching the feature
/// pipeline's default hop.
pub const SYNTH_FRAME_SHIFT: f64 = 0.01;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid language spec: {0}")]
    BadLanguageSpec(String),
    #[error("invalid instance spec: {0}")]
    BadInstanceSpec(String),
    #[error("invalid family spec: {0}")]
    BadFamilySpec(String),
    #[error("invalid corpus spec: {0}")]
    BadCorpusSpec(String),
    #[error("could not sample {needed} distinct false pairs (found {found})")]
    FalsePairsExhausted { needed: usize, found: usize },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

/// Template inventory of one synthetic language.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LanguageSpec {
    /// Number of word types.
    pub vocab_size: usize,
    /// Feature dimension of every frame.
    pub dim: usize,
    /// Inclusive template length range in frames.
    pub t_min: usize,
    pub t_max: usize,
    /// Step scale of the raw random walk. Per-dimension standardization
    /// makes downstream statistics insensitive to it.
    pub smoothness: f64,
    pub seed: u64,
}

impl Default for LanguageSpec {
    fn default() -> Self {
        LanguageSpec {
            vocab_size: 30,
            dim: 13,
            t_min: 12,
            t_max: 28,
            smoothness: 1.0,
            seed: 0,
        }
    }
}

impl LanguageSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.vocab_size < 2 {
            return Err(SynthError::BadLanguageSpec(format!(
                "vocab_size {} must be at least 2",
                self.vocab_size
            )));
        }
        if self.t_min < 4 {
            return Err(SynthError::BadLanguageSpec(format!(
                "t_min {} must be at least 4",
                self.t_min
            )));
        }
        if self.t_max < self.t_min {
            return Err(SynthError::BadLanguageSpec(format!(
                "t_max {} below t_min {}",
                self.t_max, self.t_min
            )));
        }
        if self.dim == 0 {
            return Err(SynthError::BadLanguageSpec("dim must be positive".into()));
        }
        if !(self.smoothness > 0.0 && self.smoothness.is_finite()) {
            return Err(SynthError::BadLanguageSpec(format!(
                "smoothness {} must be positive and finite",
                self.smoothness
            )));
        }
        Ok(())
    }
}

/// Nuisance variation applied when a template is spoken.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceSpec {
    /// Warp strength in [0, 1): instances dwell on template frames for
    /// random extra steps, lengthening them by up to `warp * T` frames.
    pub warp: f64,
    /// Scale of the constant offset vector each speaker adds.
    pub offset_scale: f64,
    /// Standard deviation of i.i.d. additive noise.
    pub noise: f64,
    pub speaker: String,
}

impl InstanceSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        if !(0.0..1.0).contains(&self.warp) {
            return Err(SynthError::BadInstanceSpec(format!(
                "warp {} outside [0, 1)",
                self.warp
            )));
        }
        for (name, v) in [("offset_scale", self.offset_scale), ("noise", self.noise)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(SynthError::BadInstanceSpec(format!(
                    "{name} {v} must be non-negative and finite"
                )));
            }
        }
        Ok(())
    }
}

/// A child language related to a parent: shared templates drift by `drift`,
/// and a fraction of the vocabulary is replaced outright.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub parent: LanguageSpec,
    /// Scale of the smooth perturbation added to inherited templates.
    pub drift: f64,
    /// Fraction of word types resampled fresh instead of inherited.
    pub resample_fraction: f64,
    pub seed: u64,
}

impl FamilySpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        self.parent.validate()?;
        if !(self.drift >= 0.0 && self.drift.is_finite()) {
            return Err(SynthError::BadFamilySpec(format!(
                "drift {} must be non-negative and finite",
                self.drift
            )));
        }
        if !(0.0..=1.0).contains(&self.resample_fraction) {
            return Err(SynthError::BadFamilySpec(format!(
                "resample_fraction {} outside [0, 1]",
                self.resample_fraction
            )));
        }
        Ok(())
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// One template: a Gaussian random walk, lightly smoothed with a centered
/// 3-frame moving average, then standardized to zero mean and unit variance
/// per dimension.
fn gen_template(rng: &mut ChaCha8Rng, t: usize, dim: usize, smoothness: f64) -> FeatureSequence {
    let mut walk = vec![0.0; t * dim];
    for d in 0..dim {
        walk[d] = smoothness * normal(rng);
    }
    for i in 1..t {
        for d in 0..dim {
            walk[i * dim + d] = walk[(i - 1) * dim + d] + smoothness * normal(rng);
        }
    }
    let mut data = vec![0.0; t * dim];
    for i in 0..t {
        let (lo, hi) = (i.saturating_sub(1), (i + 1).min(t - 1));
        let span = (hi - lo + 1) as f64;
        for d in 0..dim {
            data[i * dim + d] = (lo..=hi).map(|j| walk[j * dim + d]).sum::<f64>() / span;
        }
    }
    standardize(&mut data, t, dim);
    FeatureSequence::new(dim, SYNTH_FRAME_SHIFT, data)
}

fn standardize(data: &mut [f64], t: usize, dim: usize) {
    for d in 0..dim {
        let mean = (0..t).map(|i| data[i * dim + d]).sum::<f64>() / t as f64;
        let var = (0..t)
            .map(|i| (data[i * dim + d] - mean).powi(2))
            .sum::<f64>()
            / t as f64;
        let scale = 1.0 / var.max(1e-12).sqrt();
        for i in 0..t {
            data[i * dim + d] = (data[i * dim + d] - mean) * scale;
        }
    }
}

/// Generate the language's word templates, one per word type, with lengths
/// drawn uniformly from the spec's range. Pure in the spec (and its seed).
pub fn gen_language(spec: &LanguageSpec) -> Result<Vec<FeatureSequence>, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    Ok((0..spec.vocab_size)
        .map(|_| {
            let t = rng.gen_range(spec.t_min..=spec.t_max);
            gen_template(&mut rng, t, spec.dim, spec.smoothness)
        })
        .collect())
}

/// 64-bit FNV-1a, used to turn speaker names into stable offset seeds.
fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Combine seed material into a new stream seed.
fn mix(parts: &[u64]) -> u64 {
    let mut h = 0x9e3779b97f4a7c15u64;
    for &p in parts {
        let mut x = h ^ p.wrapping_mul(0xff51afd7ed558ccd);
        x ^= x >> 33;
        x = x.wrapping_mul(0xc4ceb9fe1a85ec53);
        x ^= x >> 33;
        h = x;
    }
    h
}

/// Speaker variation occupies a low-dimensional subspace of the feature
/// space, like channel and voice differences concentrating in the low
/// cepstral coefficients.
pub const OFFSET_DIMS: usize = 3;

/// The constant vector a given speaker adds to every frame. A pure function
/// of the speaker name, the scale and the dimension. Only the first
/// [`OFFSET_DIMS`] dimensions are shifted.
pub fn speaker_offset(speaker: &str, scale: f64, dim: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(fnv1a64(speaker.as_bytes()));
    let rank = OFFSET_DIMS.min(dim);
    (0..dim)
        .map(|d| if d < rank { scale * normal(&mut rng) } else { 0.0 })
        .collect()
}

/// Speak a template once: dwell on random frames (a monotone warp that only
/// repeats frames, so timing changes but values do not), add the speaker's
/// offset, then add i.i.d. noise. Output length lands in
/// `[T, floor((1 + warp) * T)]`.
pub fn gen_instance(
    template: &FeatureSequence,
    inst: &InstanceSpec,
    seed: u64,
) -> Result<FeatureSequence, SynthError> {
    inst.validate()?;
    let (t, dim) = (template.t(), template.dim());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let budget = (inst.warp * t as f64).floor() as usize;
    let extras = if budget == 0 {
        0
    } else {
        rng.gen_range(0..=budget)
    };
    let mut dwell = vec![1usize; t];
    for _ in 0..extras {
        dwell[rng.gen_range(0..t)] += 1;
    }

    let offset = speaker_offset(&inst.speaker, inst.offset_scale, dim);
    let mut data = Vec::with_capacity((t + extras) * dim);
    for (i, &reps) in dwell.iter().enumerate() {
        for _ in 0..reps {
            for (d, &v) in template.frame(i).iter().enumerate() {
                let noise = if inst.noise > 0.0 {
                    inst.noise * normal(&mut rng)
                } else {
                    0.0
                };
                data.push(v + offset[d] + noise);
            }
        }
    }
    Ok(FeatureSequence::new(dim, template.frame_shift(), data))
}

/// Derive a related language: inherited templates get a standardized smooth
/// perturbation of scale `drift`; a random `resample_fraction` of the
/// vocabulary is generated fresh. `drift` 0 with fraction 0 returns the
/// parent templates unchanged.
pub fn derive_language(family: &FamilySpec) -> Result<Vec<FeatureSequence>, SynthError> {
    family.validate()?;
    let parent = gen_language(&family.parent)?;
    let spec = &family.parent;
    let mut rng = ChaCha8Rng::seed_from_u64(family.seed);

    let n_resample =
        (family.resample_fraction * spec.vocab_size as f64).round() as usize;
    let mut order: Vec<usize> = (0..spec.vocab_size).collect();
    order.shuffle(&mut rng);
    let resampled: HashSet<usize> = order.into_iter().take(n_resample).collect();

    Ok(parent
        .iter()
        .enumerate()
        .map(|(v, tpl)| {
            if resampled.contains(&v) {
                let t = rng.gen_range(spec.t_min..=spec.t_max);
                gen_template(&mut rng, t, spec.dim, spec.smoothness)
            } else if family.drift == 0.0 {
                tpl.clone()
            } else {
                let bump = gen_template(&mut rng, tpl.t(), spec.dim, spec.smoothness);
                let mut data: Vec<f64> = tpl
                    .data()
                    .iter()
                    .zip(bump.data())
                    .map(|(a, b)| a + family.drift * b)
                    .collect();
                standardize(&mut data, tpl.t(), spec.dim);
                FeatureSequence::new(spec.dim, SYNTH_FRAME_SHIFT, data)
            }
        })
        .collect())
}

/// Pearson correlation between two templates, over the flattened prefix both
/// cover. Standardized templates make this a direct shape-similarity score.
pub fn template_correlation(a: &FeatureSequence, b: &FeatureSequence) -> f64 {
    let n = a.t().min(b.t()) * a.dim().min(b.dim());
    let (xs, ys) = (&a.data()[..n], &b.data()[..n]);
    let nf = n as f64;
    let (mx, my) = (
        xs.iter().sum::<f64>() / nf,
        ys.iter().sum::<f64>() / nf,
    );
    let (mut cov, mut vx, mut vy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        cov += (x - mx) * (y - my);
        vx += (x - mx) * (x - mx);
        vy += (y - my) * (y - my);
    }
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    cov / (vx * vy).sqrt()
}

/// Where a corpus language's templates come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum LanguageSource {
    Fresh(LanguageSpec),
    Derived(FamilySpec),
}

impl LanguageSource {
    pub fn templates(&self) -> Result<Vec<FeatureSequence>, SynthError> {
        match self {
            LanguageSource::Fresh(spec) => gen_language(spec),
            LanguageSource::Derived(family) => derive_language(family),
        }
    }

    fn validate(&self) -> Result<(), SynthError> {
        match self {
            LanguageSource::Fresh(spec) => spec.validate(),
            LanguageSource::Derived(family) => family.validate(),
        }
    }
}

/// Full corpus recipe: languages, speaker/instance counts and the shared
/// nuisance settings. Serializable so a manifest can reproduce the corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub languages: Vec<(String, LanguageSource)>,
    pub speakers_per_language: usize,
    pub instances_per_word: usize,
    /// Nuisance settings; the speaker field is ignored and replaced by each
    /// generated speaker's name.
    pub instance: InstanceSpec,
    pub seed: u64,
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.languages.is_empty() {
            return Err(SynthError::BadCorpusSpec("no languages".into()));
        }
        let mut names = HashSet::new();
        for (name, source) in &self.languages {
            if name.is_empty() || name.contains(char::is_whitespace) || name.contains(':') {
                return Err(SynthError::BadCorpusSpec(format!(
                    "language name `{name}` must be non-empty without spaces or colons"
                )));
            }
            if !names.insert(name) {
                return Err(SynthError::BadCorpusSpec(format!(
                    "duplicate language name `{name}`"
                )));
            }
            source.validate()?;
        }
        if self.speakers_per_language == 0 || self.instances_per_word == 0 {
            return Err(SynthError::BadCorpusSpec(
                "speaker and instance counts must be positive".into(),
            ));
        }
        self.instance.validate()
    }
}

/// Generated corpus: features plus the labeled segment table describing them.
#[derive(Clone, Debug)]
pub struct SyntheticCorpus {
    pub archive: FeatureArchive,
    pub segments: Vec<WordSegment>,
}

/// Generate every (language, word, speaker, instance) token. Languages are
/// generated in parallel; output order and content are pure functions of the
/// spec.
pub fn gen_corpus(spec: &CorpusSpec) -> Result<SyntheticCorpus, SynthError> {
    spec.validate()?;
    let per_language: Vec<Result<Vec<(WordSegment, FeatureSequence)>, SynthError>> = spec
        .languages
        .par_iter()
        .map(|(name, source)| {
            let templates = source.templates()?;
            let lang_key = fnv1a64(name.as_bytes());
            let mut out = Vec::new();
            for (v, template) in templates.iter().enumerate() {
                let word = format!("w{v:02}");
                for s in 0..spec.speakers_per_language {
                    let speaker = format!("{name}_s{s}");
                    let inst = InstanceSpec {
                        speaker: speaker.clone(),
                        ..spec.instance.clone()
                    };
                    for k in 0..spec.instances_per_word {
                        let inst_seed =
                            mix(&[spec.seed, lang_key, v as u64, s as u64, k as u64]);
                        let features = gen_instance(template, &inst, inst_seed)?;
                        let utt = format!("{name}_w{v:02}_s{s}_i{k}");
                        let segment = WordSegment::new(
                            &utt,
                            0,
                            features.t(),
                            Some(&word),
                            name,
                            &speaker,
                        )?;
                        out.push((segment, features));
                    }
                }
            }
            Ok(out)
        })
        .collect();

    let mut segments = Vec::new();
    let mut entries = Vec::new();
    for lang in per_language {
        for (segment, features) in lang? {
            entries.push((segment.segment_id.clone(), features));
            segments.push(segment);
        }
    }
    Ok(SyntheticCorpus {
        archive: FeatureArchive::from_entries(entries)?,
        segments,
    })
}

/// Emulate discovered pairs: sample true same-word pairs, then append false
/// pairs (same language, different word type) until the requested fraction
/// of the list is false. With fraction 0 the pairs equal
/// [`sample_true_pairs`] output for the same arguments.
pub fn utd_pairs(
    segments: &[WordSegment],
    n: usize,
    false_fraction: f64,
    seed: u64,
) -> Result<PairList, SynthError> {
    if !(0.0..=1.0).contains(&false_fraction) {
        return Err(SynthError::BadCorpusSpec(format!(
            "false fraction {false_fraction} outside [0, 1]"
        )));
    }
    let n_false = (false_fraction * n as f64).round() as usize;
    let n_true = n - n_false;
    let mut pairs = sample_true_pairs(segments, n_true, seed)?.list.pairs;

    let mut seen: HashSet<(String, String)> = pairs
        .iter()
        .map(|(a, b)| (a.clone().min(b.clone()), a.clone().max(b.clone())))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(mix(&[seed, 0x66616c7365]));
    let mut found = 0;
    let mut attempts = 0usize;
    let limit = 1000 * n_false.max(1);
    while found < n_false && attempts < limit {
        attempts += 1;
        let i = rng.gen_range(0..segments.len());
        let j = rng.gen_range(0..segments.len());
        if i == j {
            continue;
        }
        let (a, b) = (&segments[i], &segments[j]);
        if a.language != b.language || a.word_type == b.word_type {
            continue;
        }
        let key = (
            a.segment_id.clone().min(b.segment_id.clone()),
            a.segment_id.clone().max(b.segment_id.clone()),
        );
        if !seen.insert(key) {
            continue;
        }
        pairs.push((a.segment_id.clone(), b.segment_id.clone()));
        found += 1;
    }
    if found < n_false {
        return Err(SynthError::FalsePairsExhausted {
            needed: n_false,
            found,
        });
    }
    Ok(PairList {
        pairs,
        source: PairSource::Utd,
    })
}
