//! Experiment drivers: the model-comparison table, the training-language
//! ablation and the cross-lingual transfer matrix. Every run writes its
//! results as CSV plus a manifest JSON that pins the full configuration, so
//! a run can be reproduced bit-for-bit from the manifest alone.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use awe_core::corpus::{build_vocabulary, sample_true_pairs, PairList, PairSource, WordSegment};
use awe_core::grad::ArchDescriptor;
use awe_core::models::{
    downsample_embed, embed_all, train_ae, train_cae, train_classifier, TrainConfig,
    TrainingSegment,
};
use awe_core::samediff::{
    same_different_eval, same_different_eval_dtw, EvalMode, LabeledEmbedding, LabeledSequence,
};
use awe_core::synth::{gen_corpus, utd_pairs, SyntheticCorpus};
use awe_core::dtw::DtwConfig;

use crate::corpora::{default_corpus_spec, family_corpus_spec, instance_index, LanguageRoles};
use crate::RunnerError;

/// Model and optimization sizes for the synthetic experiments. The paper's
/// training scale targets hours of speech; these defaults are shrunk so the
/// full suite runs in minutes while preserving every qualitative comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentScale {
    pub hidden_units: usize,
    pub encoder_layers: usize,
    pub decoder_layers: usize,
    pub embed_dim: usize,
    pub ae_epochs: usize,
    pub cae_epochs: usize,
    pub pretrain_epochs: usize,
    pub classifier_epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub clip_norm: f64,
    /// Discovered-pair budget for each monolingual run.
    pub mono_pairs: usize,
    /// Fraction of discovered pairs that are wrong.
    pub false_fraction: f64,
    /// True-pair budget per training language for multilingual runs.
    pub multi_pairs_per_lang: usize,
    /// Instances per word held out of training for evaluation.
    pub test_instances: usize,
    pub downsample_keep: usize,
    pub eval_mode: EvalMode,
}

impl Default for ExperimentScale {
    fn default() -> Self {
        ExperimentScale {
            hidden_units: 32,
            encoder_layers: 2,
            decoder_layers: 2,
            embed_dim: 50,
            ae_epochs: 12,
            cae_epochs: 16,
            pretrain_epochs: 4,
            classifier_epochs: 12,
            batch_size: 32,
            learning_rate: 1e-3,
            clip_norm: 5.0,
            mono_pairs: 400,
            false_fraction: 0.3,
            multi_pairs_per_lang: 600,
            test_instances: 2,
            downsample_keep: 10,
            eval_mode: EvalMode::All,
        }
    }
}

impl ExperimentScale {
    fn arch(&self, input_dim: usize, n_classes: Option<usize>) -> ArchDescriptor {
        ArchDescriptor {
            input_dim,
            hidden_units: self.hidden_units,
            encoder_layers: self.encoder_layers,
            decoder_layers: self.decoder_layers,
            embed_dim: self.embed_dim,
            n_classes,
        }
    }

    fn train_config(&self, epochs: usize, pretrain: usize, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            clip_norm: self.clip_norm,
            pretrain_epochs: pretrain,
            seed,
        }
    }
}

/// Derive an independent stream seed for a named sub-task of a run.
pub fn sub_seed(seed: u64, tag: &str) -> u64 {
    let mut h = 0xcbf29ce484222325u64 ^ seed.wrapping_mul(0x9e3779b97f4a7c15);
    for b in tag.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// One (model, language, seed) result.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApCell {
    pub model: String,
    pub language: String,
    pub seed: u64,
    pub ap: f64,
}

/// Per-seed and median results of a table-shaped experiment.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TableResult {
    pub models: Vec<String>,
    pub languages: Vec<String>,
    pub seeds: Vec<u64>,
    pub cells: Vec<ApCell>,
}

impl TableResult {
    pub fn ap(&self, model: &str, language: &str, seed: u64) -> Option<f64> {
        self.cells
            .iter()
            .find(|c| c.model == model && c.language == language && c.seed == seed)
            .map(|c| c.ap)
    }

    /// Median AP over seeds for one cell.
    pub fn median_ap(&self, model: &str, language: &str) -> Option<f64> {
        let values: Vec<f64> = self
            .cells
            .iter()
            .filter(|c| c.model == model && c.language == language)
            .map(|c| c.ap)
            .collect();
        if values.is_empty() {
            None
        } else {
            Some(median(&values))
        }
    }

    /// Median over seeds of the mean AP across languages.
    pub fn median_mean_ap(&self, model: &str) -> Option<f64> {
        let mut per_seed = Vec::new();
        for &seed in &self.seeds {
            let values: Vec<f64> = self
                .cells
                .iter()
                .filter(|c| c.model == model && c.seed == seed)
                .map(|c| c.ap)
                .collect();
            if values.is_empty() {
                return None;
            }
            per_seed.push(values.iter().sum::<f64>() / values.len() as f64);
        }
        Some(median(&per_seed))
    }
}

struct PreparedCorpus {
    corpus: SyntheticCorpus,
    roles: LanguageRoles,
    /// Training-split segments (instance index below the holdout range).
    train_tokens: HashMap<String, Vec<WordSegment>>,
    /// Held-out segments used for evaluation.
    test_tokens: HashMap<String, Vec<WordSegment>>,
}

fn split_corpus(
    corpus: SyntheticCorpus,
    roles: LanguageRoles,
    instances_per_word: usize,
    test_instances: usize,
) -> Result<PreparedCorpus, RunnerError> {
    if test_instances >= instances_per_word {
        return Err(RunnerError::Invalid(format!(
            "cannot hold out {test_instances} of {instances_per_word} instances"
        )));
    }
    let cut = instances_per_word - test_instances;
    let mut train_tokens: HashMap<String, Vec<WordSegment>> = HashMap::new();
    let mut test_tokens: HashMap<String, Vec<WordSegment>> = HashMap::new();
    for seg in &corpus.segments {
        let idx = instance_index(seg).ok_or_else(|| {
            RunnerError::Invalid(format!(
                "utterance `{}` does not encode an instance index",
                seg.utterance_id
            ))
        })?;
        let bucket = if idx < cut {
            &mut train_tokens
        } else {
            &mut test_tokens
        };
        bucket
            .entry(seg.language.clone())
            .or_default()
            .push(seg.clone());
    }
    Ok(PreparedCorpus {
        corpus,
        roles,
        train_tokens,
        test_tokens,
    })
}

impl PreparedCorpus {
    fn items(&self, segments: &[WordSegment]) -> Result<Vec<TrainingSegment>, RunnerError> {
        segments
            .iter()
            .map(|seg| {
                let features = self
                    .corpus
                    .archive
                    .get(&seg.segment_id)
                    .ok_or_else(|| {
                        RunnerError::Invalid(format!("segment `{}` has no features", seg.segment_id))
                    })?
                    .clone();
                Ok(TrainingSegment {
                    segment: seg.clone(),
                    features,
                })
            })
            .collect()
    }

    fn train_items(&self, language: &str) -> Result<Vec<TrainingSegment>, RunnerError> {
        self.items(self.train_tokens.get(language).map_or(&[][..], |v| v))
    }

    fn pooled_train_items(&self, languages: &[String]) -> Result<Vec<TrainingSegment>, RunnerError> {
        let mut out = Vec::new();
        for lang in languages {
            out.extend(self.train_items(lang)?);
        }
        Ok(out)
    }

    /// The zero-resource contract: no training item may come from an
    /// evaluation (or dev) language.
    fn check_no_eval_leakage(&self, items: &[TrainingSegment]) -> Result<(), RunnerError> {
        for item in items {
            let lang = &item.segment.language;
            if self.roles.eval.contains(lang) || self.roles.dev.as_deref() == Some(lang.as_str()) {
                return Err(RunnerError::EvalLeakage(format!(
                    "segment `{}` from `{lang}`",
                    item.segment.segment_id
                )));
            }
        }
        Ok(())
    }

    fn eval_embeddings(
        &self,
        language: &str,
        mut embed_one: impl FnMut(&WordSegment) -> Result<Vec<f64>, RunnerError>,
    ) -> Result<Vec<LabeledEmbedding>, RunnerError> {
        let segs = self.test_tokens.get(language).map_or(&[][..], |v| v);
        segs.iter()
            .map(|seg| {
                Ok(LabeledEmbedding {
                    vector: embed_one(seg)?,
                    word_type: seg.word_type.clone().unwrap_or_default(),
                    speaker: seg.speaker.clone(),
                })
            })
            .collect()
    }

    fn eval_ap_for_model(
        &self,
        language: &str,
        model: &awe_core::grad::ModelParameters<f32>,
        mode: EvalMode,
    ) -> Result<f64, RunnerError> {
        let segs = self.test_tokens.get(language).map_or(&[][..], |v| v);
        let items: Vec<(String, awe_core::features::FeatureSequence)> = segs
            .iter()
            .map(|seg| {
                (
                    seg.segment_id.clone(),
                    self.corpus.archive.get(&seg.segment_id).unwrap().clone(),
                )
            })
            .collect();
        let embeddings = embed_all(model, &items)?;
        let labeled: Vec<LabeledEmbedding> = embeddings
            .into_iter()
            .zip(segs)
            .map(|(e, seg)| LabeledEmbedding {
                vector: e.vector,
                word_type: seg.word_type.clone().unwrap_or_default(),
                speaker: seg.speaker.clone(),
            })
            .collect();
        Ok(same_different_eval(&labeled, mode)?.ap)
    }
}

/// Segments referenced by a pair list, deduplicated, in first-mention order.
fn pair_segments(items: &[TrainingSegment], pairs: &PairList) -> Vec<TrainingSegment> {
    let by_id: HashMap<&str, &TrainingSegment> = items
        .iter()
        .map(|i| (i.segment.segment_id.as_str(), i))
        .collect();
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (a, b) in &pairs.pairs {
        for id in [a, b] {
            if seen.insert(id.as_str()) {
                if let Some(item) = by_id.get(id.as_str()) {
                    out.push((*item).clone());
                }
            }
        }
    }
    out
}

/// Configuration of a model-comparison run on the default synthetic corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRun {
    pub corpus_seed: u64,
    pub seeds: Vec<u64>,
    pub scale: ExperimentScale,
    pub dev_language: Option<String>,
}

impl Default for TableRun {
    fn default() -> Self {
        TableRun {
            corpus_seed: 0,
            seeds: vec![0, 1, 2],
            scale: ExperimentScale::default(),
            dev_language: None,
        }
    }
}

pub const TABLE_MODELS: [&str; 6] = [
    "dtw",
    "downsample",
    "ae_rnn",
    "cae_rnn",
    "cae_rnn_multi",
    "classifier_rnn_multi",
];

/// Compare all six models on every zero-resource language of the default
/// corpus. Monolingual models train on discovered (noisy) pairs of the
/// evaluation language's training split; multilingual models train on true
/// pairs and labels of the well-resourced languages only.
pub fn run_table(run: &TableRun, out_dir: &Path) -> Result<TableResult, RunnerError> {
    if run.seeds.is_empty() {
        return Err(RunnerError::Invalid("no seeds given".into()));
    }
    let (spec, mut roles) = default_corpus_spec(run.corpus_seed);
    if let Some(dev) = &run.dev_language {
        if !spec.languages.iter().any(|(n, _)| n == dev) {
            return Err(RunnerError::Invalid(format!("unknown dev language `{dev}`")));
        }
        roles = roles.reserve_dev(dev);
    }
    let corpus = gen_corpus(&spec)?;
    let prepared = split_corpus(
        corpus,
        roles,
        spec.instances_per_word,
        run.scale.test_instances,
    )?;
    let scale = &run.scale;
    let dim = prepared.corpus.archive.dim();
    let mut cells = Vec::new();

    // Model-free baselines do not depend on the training seed; compute once
    // and replicate so every (model, language, seed) cell exists.
    let mut baseline: HashMap<(&str, String), f64> = HashMap::new();
    for lang in prepared.roles.eval.clone() {
        let down = prepared.eval_embeddings(&lang, |seg| {
            let feats = prepared.corpus.archive.get(&seg.segment_id).unwrap();
            Ok(downsample_embed(feats, scale.downsample_keep))
        })?;
        baseline.insert(
            ("downsample", lang.clone()),
            same_different_eval(&down, scale.eval_mode)?.ap,
        );

        let sequences: Vec<LabeledSequence> = prepared
            .test_tokens
            .get(&lang)
            .map_or(&[][..], |v| v)
            .iter()
            .map(|seg| LabeledSequence {
                features: prepared.corpus.archive.get(&seg.segment_id).unwrap().clone(),
                word_type: seg.word_type.clone().unwrap_or_default(),
                speaker: seg.speaker.clone(),
            })
            .collect();
        baseline.insert(
            ("dtw", lang.clone()),
            same_different_eval_dtw(&sequences, &DtwConfig::default(), scale.eval_mode)?.ap,
        );
    }

    for &seed in &run.seeds {
        // Multilingual models: one of each per seed, shared across columns.
        let multi_items = prepared.pooled_train_items(&prepared.roles.train)?;
        prepared.check_no_eval_leakage(&multi_items)?;
        let mut pooled = Vec::new();
        for lang in &prepared.roles.train {
            let lang_tokens = prepared.train_tokens.get(lang).map_or(&[][..], |v| v);
            pooled.extend(
                sample_true_pairs(lang_tokens, scale.multi_pairs_per_lang, sub_seed(seed, lang))?
                    .list
                    .pairs,
            );
        }
        let multi_pairs = PairList {
            pairs: pooled,
            source: PairSource::True,
        };
        let train_segments: Vec<WordSegment> =
            multi_items.iter().map(|i| i.segment.clone()).collect();
        let vocab = build_vocabulary(&train_segments, usize::MAX);

        // The two multilingual trainings are independent jobs.
        let (cae_multi, classifier) = rayon::join(
            || {
                train_cae::<f32>(
                    &multi_items,
                    &multi_pairs,
                    &scale.arch(dim, None),
                    &scale.train_config(scale.cae_epochs, scale.pretrain_epochs, seed),
                )
            },
            || {
                train_classifier::<f32>(
                    &multi_items,
                    &vocab,
                    &scale.arch(dim, Some(vocab.k())),
                    &scale.train_config(scale.classifier_epochs, 0, seed),
                )
            },
        );
        let (cae_multi, classifier) = (cae_multi?, classifier?);

        // Monolingual runs are independent per language.
        let per_language: Vec<Vec<ApCell>> = prepared
            .roles
            .eval
            .par_iter()
            .map(|lang| -> Result<Vec<ApCell>, RunnerError> {
                let mono_items = prepared.train_items(lang)?;
                let mono_segments: Vec<WordSegment> =
                    mono_items.iter().map(|i| i.segment.clone()).collect();
                let noisy = utd_pairs(
                    &mono_segments,
                    scale.mono_pairs,
                    scale.false_fraction,
                    sub_seed(seed, &format!("utd:{lang}")),
                )?;
                let cae_mono = train_cae::<f32>(
                    &mono_items,
                    &noisy,
                    &scale.arch(dim, None),
                    &scale.train_config(scale.cae_epochs, scale.pretrain_epochs, seed),
                )?;
                let ae_items = pair_segments(&mono_items, &noisy);
                let ae = train_ae::<f32>(
                    &ae_items,
                    &scale.arch(dim, None),
                    &scale.train_config(scale.ae_epochs, 0, seed),
                )?;

                let cell = |model: &str, ap: f64| ApCell {
                    model: model.into(),
                    language: lang.clone(),
                    seed,
                    ap,
                };
                Ok(vec![
                    cell("dtw", baseline[&("dtw", lang.clone())]),
                    cell("downsample", baseline[&("downsample", lang.clone())]),
                    cell(
                        "ae_rnn",
                        prepared.eval_ap_for_model(lang, &ae.model, scale.eval_mode)?,
                    ),
                    cell(
                        "cae_rnn",
                        prepared.eval_ap_for_model(lang, &cae_mono.model, scale.eval_mode)?,
                    ),
                    cell(
                        "cae_rnn_multi",
                        prepared.eval_ap_for_model(lang, &cae_multi.model, scale.eval_mode)?,
                    ),
                    cell(
                        "classifier_rnn_multi",
                        prepared.eval_ap_for_model(lang, &classifier.model, scale.eval_mode)?,
                    ),
                ])
            })
            .collect::<Result<_, _>>()?;
        cells.extend(per_language.into_iter().flatten());
    }

    let result = TableResult {
        models: TABLE_MODELS.iter().map(|s| s.to_string()).collect(),
        languages: prepared.roles.eval.clone(),
        seeds: run.seeds.clone(),
        cells,
    };
    fs::create_dir_all(out_dir)?;
    write_cells_csv(&out_dir.join("table.csv"), &result.cells)?;
    write_median_csv(&out_dir.join("table_median.csv"), &result)?;
    write_manifest(&out_dir.join("manifest.json"), "table", run)?;
    Ok(result)
}

/// Configuration of a cross-lingual transfer matrix run on the family corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossmatrixRun {
    pub corpus_seed: u64,
    pub seeds: Vec<u64>,
    pub scale: ExperimentScale,
}

impl Default for CrossmatrixRun {
    fn default() -> Self {
        CrossmatrixRun {
            corpus_seed: 0,
            seeds: vec![0, 1, 2],
            scale: ExperimentScale::default(),
        }
    }
}

/// Transfer matrix plus which (train, eval) pairs are related.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MatrixResult {
    pub train_languages: Vec<String>,
    pub eval_languages: Vec<String>,
    pub related: Vec<(String, String)>,
    pub seeds: Vec<u64>,
    /// `model` holds the training language here.
    pub cells: Vec<ApCell>,
}

impl MatrixResult {
    pub fn median_ap(&self, train: &str, eval: &str) -> Option<f64> {
        let values: Vec<f64> = self
            .cells
            .iter()
            .filter(|c| c.model == train && c.language == eval)
            .map(|c| c.ap)
            .collect();
        if values.is_empty() {
            None
        } else {
            Some(median(&values))
        }
    }

    /// Median matrix with each evaluation column divided by its maximum.
    pub fn normalized_columns(&self) -> Vec<(String, String, f64)> {
        let mut out = Vec::new();
        for eval in &self.eval_languages {
            let col: Vec<(String, f64)> = self
                .train_languages
                .iter()
                .map(|t| (t.clone(), self.median_ap(t, eval).unwrap_or(0.0)))
                .collect();
            let max = col.iter().map(|(_, v)| *v).fold(f64::MIN, f64::max);
            for (train, v) in col {
                let norm = if max > 0.0 { v / max } else { 0.0 };
                out.push((train, eval.clone(), norm));
            }
        }
        out
    }
}

/// Train one supervised CAE per training language of the family corpus and
/// evaluate it on every evaluation language.
pub fn run_crossmatrix(run: &CrossmatrixRun, out_dir: &Path) -> Result<MatrixResult, RunnerError> {
    if run.seeds.is_empty() {
        return Err(RunnerError::Invalid("no seeds given".into()));
    }
    let (spec, roles, related) = family_corpus_spec(run.corpus_seed);
    let corpus = gen_corpus(&spec)?;
    let prepared = split_corpus(
        corpus,
        roles,
        spec.instances_per_word,
        run.scale.test_instances,
    )?;
    let scale = &run.scale;
    let dim = prepared.corpus.archive.dim();
    let mut cells = Vec::new();

    for &seed in &run.seeds {
        let per_train: Vec<Vec<ApCell>> = prepared
            .roles
            .train
            .par_iter()
            .map(|train_lang| -> Result<Vec<ApCell>, RunnerError> {
                let items = prepared.train_items(train_lang)?;
                prepared.check_no_eval_leakage(&items)?;
                let segments: Vec<WordSegment> =
                    items.iter().map(|i| i.segment.clone()).collect();
                let pairs = sample_true_pairs(
                    &segments,
                    scale.multi_pairs_per_lang,
                    sub_seed(seed, train_lang),
                )?
                .list;
                let trained = train_cae::<f32>(
                    &items,
                    &pairs,
                    &scale.arch(dim, None),
                    &scale.train_config(scale.cae_epochs, scale.pretrain_epochs, seed),
                )?;
                prepared
                    .roles
                    .eval
                    .iter()
                    .map(|eval_lang| {
                        Ok(ApCell {
                            model: train_lang.clone(),
                            language: eval_lang.clone(),
                            seed,
                            ap: prepared.eval_ap_for_model(
                                eval_lang,
                                &trained.model,
                                scale.eval_mode,
                            )?,
                        })
                    })
                    .collect()
            })
            .collect::<Result<_, _>>()?;
        cells.extend(per_train.into_iter().flatten());
    }

    let result = MatrixResult {
        train_languages: prepared.roles.train.clone(),
        eval_languages: prepared.roles.eval.clone(),
        related,
        seeds: run.seeds.clone(),
        cells,
    };
    fs::create_dir_all(out_dir)?;
    write_matrix_csv(out_dir, &result)?;
    write_manifest(&out_dir.join("manifest.json"), "crossmatrix", run)?;
    Ok(result)
}

/// Configuration of a training-language ablation on the family corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRun {
    pub corpus_seed: u64,
    pub seeds: Vec<u64>,
    pub scale: ExperimentScale,
    /// Training-language subsets, e.g. `[["fam0_kin"], ["fam0_kin", "far0"]]`.
    pub subsets: Vec<Vec<String>>,
    pub eval_language: String,
    /// Also train the noisy-pair monolingual CAE on the evaluation language
    /// as a reference point.
    pub mono_baseline: bool,
}

/// One ablation measurement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationCell {
    pub subset: String,
    pub model: String,
    pub seed: u64,
    pub ap: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AblationResult {
    pub eval_language: String,
    pub seeds: Vec<u64>,
    pub cells: Vec<AblationCell>,
    /// (seed, AP) of the monolingual noisy-pair CAE, when requested.
    pub mono_baseline: Vec<(u64, f64)>,
}

impl AblationResult {
    pub fn median_ap(&self, subset: &str, model: &str) -> Option<f64> {
        let values: Vec<f64> = self
            .cells
            .iter()
            .filter(|c| c.subset == subset && c.model == model)
            .map(|c| c.ap)
            .collect();
        if values.is_empty() {
            None
        } else {
            Some(median(&values))
        }
    }

    pub fn median_mono_baseline(&self) -> Option<f64> {
        if self.mono_baseline.is_empty() {
            return None;
        }
        let values: Vec<f64> = self.mono_baseline.iter().map(|(_, ap)| *ap).collect();
        Some(median(&values))
    }
}

/// Label for a subset, used in CSV rows.
pub fn subset_label(subset: &[String]) -> String {
    subset.join("+")
}

/// Train the supervised CAE and the classifier on growing training-language
/// subsets, always evaluating on one zero-resource language.
pub fn run_ablation(run: &AblationRun, out_dir: &Path) -> Result<AblationResult, RunnerError> {
    if run.seeds.is_empty() || run.subsets.is_empty() {
        return Err(RunnerError::Invalid("no seeds or subsets given".into()));
    }
    let (spec, roles, _) = family_corpus_spec(run.corpus_seed);
    if !roles.eval.contains(&run.eval_language) {
        return Err(RunnerError::Invalid(format!(
            "`{}` is not an evaluation language",
            run.eval_language
        )));
    }
    for subset in &run.subsets {
        for lang in subset {
            if !roles.train.contains(lang) {
                return Err(RunnerError::Invalid(format!(
                    "`{lang}` is not a training language"
                )));
            }
        }
    }
    let corpus = gen_corpus(&spec)?;
    let prepared = split_corpus(
        corpus,
        roles,
        spec.instances_per_word,
        run.scale.test_instances,
    )?;
    let scale = &run.scale;
    let dim = prepared.corpus.archive.dim();
    let mut cells = Vec::new();
    let mut mono = Vec::new();

    for &seed in &run.seeds {
        if run.mono_baseline {
            let items = prepared.train_items(&run.eval_language)?;
            let segments: Vec<WordSegment> = items.iter().map(|i| i.segment.clone()).collect();
            let noisy = utd_pairs(
                &segments,
                scale.mono_pairs,
                scale.false_fraction,
                sub_seed(seed, &format!("utd:{}", run.eval_language)),
            )?;
            let trained = train_cae::<f32>(
                &items,
                &noisy,
                &scale.arch(dim, None),
                &scale.train_config(scale.cae_epochs, scale.pretrain_epochs, seed),
            )?;
            mono.push((
                seed,
                prepared.eval_ap_for_model(&run.eval_language, &trained.model, scale.eval_mode)?,
            ));
        }

        let per_subset: Vec<Vec<AblationCell>> = run
            .subsets
            .par_iter()
            .map(|subset| -> Result<Vec<AblationCell>, RunnerError> {
                let items = prepared.pooled_train_items(subset)?;
                prepared.check_no_eval_leakage(&items)?;
                let mut pooled = Vec::new();
                for lang in subset {
                    let lang_tokens = prepared.train_tokens.get(lang).map_or(&[][..], |v| v);
                    pooled.extend(
                        sample_true_pairs(
                            lang_tokens,
                            scale.multi_pairs_per_lang,
                            sub_seed(seed, lang),
                        )?
                        .list
                        .pairs,
                    );
                }
                let pairs = PairList {
                    pairs: pooled,
                    source: PairSource::True,
                };
                let cae = train_cae::<f32>(
                    &items,
                    &pairs,
                    &scale.arch(dim, None),
                    &scale.train_config(scale.cae_epochs, scale.pretrain_epochs, seed),
                )?;
                let segments: Vec<WordSegment> =
                    items.iter().map(|i| i.segment.clone()).collect();
                let vocab = build_vocabulary(&segments, usize::MAX);
                let cls = train_classifier::<f32>(
                    &items,
                    &vocab,
                    &scale.arch(dim, Some(vocab.k())),
                    &scale.train_config(scale.classifier_epochs, 0, seed),
                )?;
                Ok(vec![
                    AblationCell {
                        subset: subset_label(subset),
                        model: "cae_rnn".into(),
                        seed,
                        ap: prepared.eval_ap_for_model(
                            &run.eval_language,
                            &cae.model,
                            scale.eval_mode,
                        )?,
                    },
                    AblationCell {
                        subset: subset_label(subset),
                        model: "classifier_rnn".into(),
                        seed,
                        ap: prepared.eval_ap_for_model(
                            &run.eval_language,
                            &cls.model,
                            scale.eval_mode,
                        )?,
                    },
                ])
            })
            .collect::<Result<_, _>>()?;
        cells.extend(per_subset.into_iter().flatten());
    }

    let result = AblationResult {
        eval_language: run.eval_language.clone(),
        seeds: run.seeds.clone(),
        cells,
        mono_baseline: mono,
    };
    fs::create_dir_all(out_dir)?;
    write_ablation_csv(&out_dir.join("ablation.csv"), &result)?;
    if run.mono_baseline {
        let mut text = String::from("seed,ap\n");
        for (seed, ap) in &result.mono_baseline {
            text.push_str(&format!("{seed},{ap}\n"));
        }
        fs::write(out_dir.join("mono_baseline.csv"), text)?;
    }
    write_manifest(&out_dir.join("manifest.json"), "ablation", run)?;
    Ok(result)
}

fn write_cells_csv(path: &Path, cells: &[ApCell]) -> Result<(), RunnerError> {
    let mut text = String::from("model,language,seed,ap\n");
    for c in cells {
        text.push_str(&format!("{},{},{},{}\n", c.model, c.language, c.seed, c.ap));
    }
    fs::write(path, text)?;
    Ok(())
}

fn write_median_csv(path: &Path, result: &TableResult) -> Result<(), RunnerError> {
    let mut text = String::from("model");
    for lang in &result.languages {
        text.push_str(&format!(",{lang}"));
    }
    text.push('\n');
    for model in &result.models {
        text.push_str(model);
        for lang in &result.languages {
            let ap = result.median_ap(model, lang).unwrap_or(f64::NAN);
            text.push_str(&format!(",{ap}"));
        }
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

fn write_matrix_csv(out_dir: &Path, result: &MatrixResult) -> Result<(), RunnerError> {
    let mut text = String::from("train_language,eval_language,seed,ap\n");
    for c in &result.cells {
        text.push_str(&format!("{},{},{},{}\n", c.model, c.language, c.seed, c.ap));
    }
    fs::write(out_dir.join("matrix.csv"), text)?;

    let mut text = String::from("train_language");
    for eval in &result.eval_languages {
        text.push_str(&format!(",{eval}"));
    }
    text.push('\n');
    for train in &result.train_languages {
        text.push_str(train);
        for eval in &result.eval_languages {
            text.push_str(&format!(",{}", result.median_ap(train, eval).unwrap_or(f64::NAN)));
        }
        text.push('\n');
    }
    fs::write(out_dir.join("matrix_median.csv"), text)?;

    let mut text = String::from("train_language,eval_language,normalized_ap\n");
    for (train, eval, v) in result.normalized_columns() {
        text.push_str(&format!("{train},{eval},{v}\n"));
    }
    fs::write(out_dir.join("matrix_normalized.csv"), text)?;
    Ok(())
}

fn write_ablation_csv(path: &Path, result: &AblationResult) -> Result<(), RunnerError> {
    let mut text = String::from("subset,model,AP,seed\n");
    for c in &result.cells {
        text.push_str(&format!("{},{},{},{}\n", c.subset, c.model, c.ap, c.seed));
    }
    fs::write(path, text)?;
    Ok(())
}

/// Pin the experiment kind, its full config and the code version.
pub fn write_manifest<C: Serialize>(
    path: &Path,
    kind: &str,
    config: &C,
) -> Result<(), RunnerError> {
    let manifest = serde_json::json!({
        "kind": kind,
        "version": env!("CARGO_PKG_VERSION"),
        "config": config,
    });
    fs::write(path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

/// Median across a slice of measurements, for reports.
pub fn median_of(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(median(values))
    }
}
