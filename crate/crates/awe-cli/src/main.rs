//! `awe`: acoustic word embedding toolkit.
//!
//! Subcommands cover the full pipeline: feature extraction, pair sampling,
//! synthetic corpus generation, model training, embedding, same-different
//! evaluation and the stock experiment suites. Every command writes its
//! machine-readable outputs under `--out` and exits nonzero on any failure.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use awe_core::corpus::{
    build_vocabulary, load_alignments, load_pairs, read_archive, sample_true_pairs,
    write_alignments, write_archive, write_pairs, FeatureArchive, PairSource, SegmentTable,
    WordSegment,
};
use awe_core::dtw::{DtwConfig, LocalMetric};
use awe_core::features::wav::read_wav;
use awe_core::features::{mfcc, slice_segment, FeatureSequence, FirstCoefficient, MfccConfig};
use awe_core::grad::{load_checkpoint, save_checkpoint, ArchDescriptor};
use awe_core::models::{
    downsample_embed, embed_all, train_ae, train_cae, train_classifier, TrainConfig, TrainOutcome,
    TrainingSegment,
};
use awe_core::samediff::{same_different_eval, same_different_eval_dtw, EvalMode, LabeledEmbedding, LabeledSequence};
use awe_core::synth::{gen_corpus, utd_pairs};
use awe_core::Real;

use awe_cli::corpora::{default_corpus_spec, family_corpus_spec};
use awe_cli::experiments::{
    run_ablation, run_crossmatrix, run_table, AblationRun, CrossmatrixRun, ExperimentScale,
    TableRun,
};
use awe_cli::RunnerError;

#[derive(Parser)]
#[command(name = "awe", version, about = "Acoustic word embedding toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract MFCC features for word segments from wav files.
    Features {
        #[command(subcommand)]
        command: FeaturesCommand,
    },
    /// Operations on segment lists.
    Corpus {
        #[command(subcommand)]
        command: CorpusCommand,
    },
    /// Generate synthetic corpora.
    Synth {
        #[command(subcommand)]
        command: SynthCommand,
    },
    /// Train a model.
    Train {
        #[command(subcommand)]
        command: TrainCommand,
    },
    /// Embed segments with a trained model or the downsampling baseline.
    Embed(EmbedArgs),
    /// Same-different word discrimination evaluation.
    Eval {
        #[command(subcommand)]
        command: EvalCommand,
    },
    /// Stock experiment suites.
    Xpr {
        #[command(subcommand)]
        command: XprCommand,
    },
}

#[derive(Subcommand)]
enum FeaturesCommand {
    /// Compute per-segment MFCCs from one wav file per utterance.
    Extract(FeaturesExtractArgs),
}

#[derive(Args)]
struct FeaturesExtractArgs {
    /// Directory holding `<utterance_id>.wav` files.
    #[arg(long)]
    wav_dir: PathBuf,
    /// Alignment file: `utterance start end word language speaker` per line.
    #[arg(long)]
    alignments: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Cepstral coefficients per frame.
    #[arg(long, default_value_t = 13)]
    n_ceps: usize,
    /// Mel filterbank size.
    #[arg(long, default_value_t = 24)]
    n_mels: usize,
    /// Skip per-utterance mean/variance normalization.
    #[arg(long)]
    no_cmvn: bool,
    /// Replace the first cepstral coefficient with frame log-energy.
    #[arg(long)]
    log_energy: bool,
}

#[derive(Subcommand)]
enum CorpusCommand {
    /// Sample ground-truth same-word pairs from labeled segments.
    Pairs(CorpusPairsArgs),
}

#[derive(Args)]
struct CorpusPairsArgs {
    #[arg(long)]
    alignments: PathBuf,
    /// Number of pairs to draw.
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum SynthCommand {
    /// Generate a stock synthetic corpus.
    Generate(SynthGenerateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum CorpusPreset {
    /// Six zero-resource plus seven well-resourced languages.
    Default,
    /// Three language families plus one unrelated language.
    Family,
}

#[derive(Args)]
struct SynthGenerateArgs {
    #[arg(long, value_enum, default_value_t = CorpusPreset::Default)]
    preset: CorpusPreset,
    #[arg(long, default_value_t = 0)]
    corpus_seed: u64,
    /// Also sample discovered-style pairs for this language.
    #[arg(long)]
    pairs_language: Option<String>,
    /// Discovered-pair budget when `--pairs-language` is set.
    #[arg(long, default_value_t = 400)]
    pairs: usize,
    /// Fraction of discovered pairs that are wrong.
    #[arg(long, default_value_t = 0.3)]
    false_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pairs_seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Precision {
    F32,
    F64,
}

#[derive(Args)]
struct ArchArgs {
    #[arg(long, default_value_t = 400)]
    hidden_units: usize,
    #[arg(long, default_value_t = 3)]
    encoder_layers: usize,
    #[arg(long, default_value_t = 3)]
    decoder_layers: usize,
    #[arg(long, default_value_t = 130)]
    embed_dim: usize,
}

impl ArchArgs {
    fn descriptor(&self, input_dim: usize, n_classes: Option<usize>) -> ArchDescriptor {
        ArchDescriptor {
            input_dim,
            hidden_units: self.hidden_units,
            encoder_layers: self.encoder_layers,
            decoder_layers: self.decoder_layers,
            embed_dim: self.embed_dim,
            n_classes,
        }
    }
}

#[derive(Args)]
struct TrainCommonArgs {
    #[arg(long)]
    archive: PathBuf,
    #[arg(long)]
    alignments: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    arch: ArchArgs,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    learning_rate: f64,
    #[arg(long, default_value_t = 5.0)]
    clip_norm: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Precision::F32)]
    precision: Precision,
}

#[derive(Subcommand)]
enum TrainCommand {
    /// Autoencoder: reconstruct each segment from its own embedding.
    Ae(TrainAeArgs),
    /// Correspondence autoencoder: reconstruct the paired segment.
    Cae(TrainCaeArgs),
    /// Word classifier over a joint (language, word) vocabulary.
    Classifier(TrainClassifierArgs),
}

#[derive(Args)]
struct TrainAeArgs {
    #[command(flatten)]
    common: TrainCommonArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum PairKind {
    /// Pairs from an unsupervised term discovery system.
    Utd,
    /// Ground-truth same-word pairs.
    True,
}

#[derive(Args)]
struct TrainCaeArgs {
    #[command(flatten)]
    common: TrainCommonArgs,
    /// Pair file: two segment ids per line.
    #[arg(long)]
    pairs: PathBuf,
    #[arg(long, value_enum, default_value_t = PairKind::Utd)]
    pairs_source: PairKind,
    /// Autoencoder warm-up epochs before correspondence training.
    #[arg(long, default_value_t = 15)]
    pretrain_epochs: usize,
}

#[derive(Args)]
struct TrainClassifierArgs {
    #[command(flatten)]
    common: TrainCommonArgs,
    /// Keep at most this many word types per language.
    #[arg(long, default_value_t = usize::MAX)]
    vocab_cap: usize,
}

#[derive(Args)]
struct EmbedArgs {
    #[arg(long)]
    archive: PathBuf,
    /// Checkpoint of a trained model.
    #[arg(long, conflicts_with = "downsample")]
    model: Option<PathBuf>,
    /// Downsampling baseline: keep this many equally spaced frames.
    #[arg(long)]
    downsample: Option<usize>,
    #[arg(long, value_enum, default_value_t = Precision::F32)]
    precision: Precision,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    /// Any same-word pair is positive.
    All,
    /// Only same-word, different-speaker pairs are positive.
    Swdp,
}

impl From<ModeArg> for EvalMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::All => EvalMode::All,
            ModeArg::Swdp => EvalMode::Swdp,
        }
    }
}

#[derive(Subcommand)]
enum EvalCommand {
    /// Rank embedding pairs by cosine distance and report AP.
    Samediff(EvalSamediffArgs),
    /// Rank raw-feature pairs by DTW alignment cost and report AP.
    Dtw(EvalDtwArgs),
}

#[derive(Args)]
struct EvalSamediffArgs {
    /// Embedding file: `segment_id v1 .. vM` per line.
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long)]
    alignments: PathBuf,
    #[arg(long, value_enum, default_value_t = ModeArg::All)]
    mode: ModeArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Cosine,
    Euclidean,
}

#[derive(Args)]
struct EvalDtwArgs {
    #[arg(long)]
    archive: PathBuf,
    #[arg(long)]
    alignments: PathBuf,
    #[arg(long, value_enum, default_value_t = MetricArg::Cosine)]
    metric: MetricArg,
    /// Rank by raw accumulated cost instead of per-cell normalized cost.
    #[arg(long)]
    no_path_normalization: bool,
    #[arg(long, value_enum, default_value_t = ModeArg::All)]
    mode: ModeArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct XprCommonArgs {
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated training seeds.
    #[arg(long, default_value = "0,1,2", value_delimiter = ',')]
    seeds: Vec<u64>,
    #[arg(long, default_value_t = 0)]
    corpus_seed: u64,
    /// JSON file overriding the stock experiment scale.
    #[arg(long)]
    scale: Option<PathBuf>,
}

#[derive(Subcommand)]
enum XprCommand {
    /// Six-model comparison on the default synthetic corpus.
    Table {
        #[command(flatten)]
        common: XprCommonArgs,
        /// Reserve one language for tuning; it is excluded from training
        /// and from the final evaluation.
        #[arg(long)]
        dev_language: Option<String>,
    },
    /// Training-language ablation on the family corpus.
    Ablation {
        #[command(flatten)]
        common: XprCommonArgs,
        /// Semicolon-separated subsets of comma-separated languages,
        /// e.g. `fam0_kin;fam0_kin,far0`.
        #[arg(long, default_value = "fam0_kin;fam0_kin,far0;fam0_kin,far0,fam1_kin,fam2_kin")]
        subsets: String,
        #[arg(long, default_value = "fam0")]
        eval_language: String,
        /// Skip the monolingual noisy-pair baseline.
        #[arg(long)]
        no_mono_baseline: bool,
    },
    /// Cross-lingual transfer matrix on the family corpus.
    Crossmatrix {
        #[command(flatten)]
        common: XprCommonArgs,
    },
}

fn load_scale(path: Option<&Path>) -> Result<ExperimentScale, RunnerError> {
    match path {
        None => Ok(ExperimentScale::default()),
        Some(p) => Ok(serde_json::from_str(&fs::read_to_string(p)?)?),
    }
}

fn training_items(
    archive: &FeatureArchive,
    segments: &[WordSegment],
) -> Result<Vec<TrainingSegment>, RunnerError> {
    segments
        .iter()
        .map(|seg| {
            let features = archive
                .get(&seg.segment_id)
                .ok_or_else(|| {
                    RunnerError::Invalid(format!(
                        "segment `{}` missing from archive",
                        seg.segment_id
                    ))
                })?
                .clone();
            Ok(TrainingSegment {
                segment: seg.clone(),
                features,
            })
        })
        .collect()
}

fn write_training_report<P: Real>(
    out: &Path,
    kind: &str,
    outcome: &TrainOutcome<P>,
    cfg: &TrainConfig,
) -> Result<(), RunnerError> {
    let report = serde_json::json!({
        "kind": kind,
        "arch": outcome.model.arch,
        "config": cfg,
        "pretrain_trace": outcome.pretrain_trace,
        "loss_trace": outcome.loss_trace,
        "dropped_short": outcome.dropped_short,
        "dropped_unlabeled": outcome.dropped_unlabeled,
    });
    fs::write(out.join("report.json"), serde_json::to_string_pretty(&report)?)?;
    Ok(())
}

fn finish_training<P: Real>(
    out: &Path,
    kind: &str,
    outcome: &TrainOutcome<P>,
    cfg: &TrainConfig,
) -> Result<(), RunnerError> {
    fs::create_dir_all(out)?;
    save_checkpoint(&out.join("model.awep"), &outcome.model)?;
    write_training_report(out, kind, outcome, cfg)?;
    let last = outcome.loss_trace.last().copied().unwrap_or(f64::NAN);
    println!("{kind}: final mean loss {last:.6}, model written to {}", out.join("model.awep").display());
    Ok(())
}

fn run_train<P: Real>(cmd: &TrainCommand) -> Result<(), RunnerError> {
    let common = match cmd {
        TrainCommand::Ae(a) => &a.common,
        TrainCommand::Cae(a) => &a.common,
        TrainCommand::Classifier(a) => &a.common,
    };
    let archive = read_archive(&common.archive)?;
    let segments = load_alignments(&common.alignments)?;
    let items = training_items(&archive, &segments)?;
    let dim = archive.dim();
    let mut cfg = TrainConfig {
        epochs: 0,
        batch_size: common.batch_size,
        learning_rate: common.learning_rate,
        clip_norm: common.clip_norm,
        pretrain_epochs: 0,
        seed: common.seed,
    };
    match cmd {
        TrainCommand::Ae(_) => {
            cfg.epochs = common.epochs.unwrap_or(30);
            let arch = common.arch.descriptor(dim, None);
            let outcome = train_ae::<P>(&items, &arch, &cfg)?;
            finish_training(&common.out, "ae", &outcome, &cfg)
        }
        TrainCommand::Cae(args) => {
            cfg.epochs = common.epochs.unwrap_or(30);
            cfg.pretrain_epochs = args.pretrain_epochs;
            let table = SegmentTable::from_segments(segments.clone())?;
            let source = match args.pairs_source {
                PairKind::Utd => PairSource::Utd,
                PairKind::True => PairSource::True,
            };
            let pairs = load_pairs(&args.pairs, source, &table)?;
            let arch = common.arch.descriptor(dim, None);
            let outcome = train_cae::<P>(&items, &pairs, &arch, &cfg)?;
            finish_training(&common.out, "cae", &outcome, &cfg)
        }
        TrainCommand::Classifier(args) => {
            cfg.epochs = common.epochs.unwrap_or(50);
            let vocab = build_vocabulary(&segments, args.vocab_cap);
            let arch = common.arch.descriptor(dim, Some(vocab.k()));
            let outcome = train_classifier::<P>(&items, &vocab, &arch, &cfg)?;
            fs::create_dir_all(&common.out)?;
            fs::write(
                common.out.join("vocab.json"),
                serde_json::to_string_pretty(vocab.entries())?,
            )?;
            finish_training(&common.out, "classifier", &outcome, &cfg)
        }
    }
}

fn write_embeddings(path: &Path, rows: &[(String, Vec<f64>)]) -> Result<(), RunnerError> {
    use std::fmt::Write as _;
    let mut text = String::new();
    for (id, v) in rows {
        text.push_str(id);
        for x in v {
            write!(text, " {x:?}").expect("writing to string");
        }
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

fn read_embeddings(path: &Path) -> Result<Vec<(String, Vec<f64>)>, RunnerError> {
    let text = fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let id = parts
            .next()
            .ok_or_else(|| RunnerError::Invalid(format!("line {}: empty", i + 1)))?
            .to_string();
        let vector: Vec<f64> = parts
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|e| RunnerError::Invalid(format!("line {}: {e}", i + 1)))?;
        if vector.is_empty() {
            return Err(RunnerError::Invalid(format!(
                "line {}: id `{id}` has no values",
                i + 1
            )));
        }
        rows.push((id, vector));
    }
    Ok(rows)
}

fn run_embed(args: &EmbedArgs) -> Result<(), RunnerError> {
    let archive = read_archive(&args.archive)?;
    let rows: Vec<(String, Vec<f64>)> = match (&args.model, args.downsample) {
        (Some(model_path), None) => {
            let items: Vec<(String, FeatureSequence)> = archive
                .ids()
                .iter()
                .map(|id| (id.clone(), archive.get(id).unwrap().clone()))
                .collect();
            let embeddings = match args.precision {
                Precision::F32 => embed_all(&load_checkpoint::<f32>(model_path)?, &items)?,
                Precision::F64 => embed_all(&load_checkpoint::<f64>(model_path)?, &items)?,
            };
            embeddings.into_iter().map(|e| (e.segment_id, e.vector)).collect()
        }
        (None, Some(keep)) => {
            if keep == 0 {
                return Err(RunnerError::Invalid("--downsample must be at least 1".into()));
            }
            archive
                .ids()
                .iter()
                .map(|id| (id.clone(), downsample_embed(archive.get(id).unwrap(), keep)))
                .collect()
        }
        _ => {
            return Err(RunnerError::Invalid(
                "exactly one of --model and --downsample is required".into(),
            ))
        }
    };
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    write_embeddings(&args.out, &rows)?;
    println!("wrote {} embeddings to {}", rows.len(), args.out.display());
    Ok(())
}

fn write_eval_outputs(
    out: &Path,
    report: &awe_core::samediff::EvalReport,
) -> Result<(), RunnerError> {
    fs::create_dir_all(out)?;
    fs::write(out.join("report.json"), serde_json::to_string_pretty(report)?)?;
    let mut pr = String::from("threshold,precision,recall\n");
    for p in &report.pr {
        pr.push_str(&format!("{},{},{}\n", p.threshold, p.precision, p.recall));
    }
    fs::write(out.join("pr.csv"), pr)?;
    println!("AP {:.6} over {} pairs ({} positive)", report.ap, report.n_pairs, report.n_positive);
    Ok(())
}

fn run_eval_samediff(args: &EvalSamediffArgs) -> Result<(), RunnerError> {
    let rows = read_embeddings(&args.embeddings)?;
    let table = SegmentTable::from_segments(load_alignments(&args.alignments)?)?;
    let items: Vec<LabeledEmbedding> = rows
        .into_iter()
        .map(|(id, vector)| {
            let seg = table
                .get(&id)
                .ok_or_else(|| RunnerError::Invalid(format!("unknown segment id `{id}`")))?;
            let word_type = seg.word_type.clone().ok_or_else(|| {
                RunnerError::Invalid(format!("segment `{id}` has no word label"))
            })?;
            Ok(LabeledEmbedding {
                vector,
                word_type,
                speaker: seg.speaker.clone(),
            })
        })
        .collect::<Result<_, RunnerError>>()?;
    let report = same_different_eval(&items, args.mode.into())?;
    write_eval_outputs(&args.out, &report)
}

fn run_eval_dtw(args: &EvalDtwArgs) -> Result<(), RunnerError> {
    let archive = read_archive(&args.archive)?;
    let segments = load_alignments(&args.alignments)?;
    let items: Vec<LabeledSequence> = segments
        .iter()
        .map(|seg| {
            let features = archive
                .get(&seg.segment_id)
                .ok_or_else(|| {
                    RunnerError::Invalid(format!(
                        "segment `{}` missing from archive",
                        seg.segment_id
                    ))
                })?
                .clone();
            let word_type = seg.word_type.clone().ok_or_else(|| {
                RunnerError::Invalid(format!("segment `{}` has no word label", seg.segment_id))
            })?;
            Ok(LabeledSequence {
                features,
                word_type,
                speaker: seg.speaker.clone(),
            })
        })
        .collect::<Result<_, RunnerError>>()?;
    let cfg = DtwConfig {
        local_metric: match args.metric {
            MetricArg::Cosine => LocalMetric::CosineDistance,
            MetricArg::Euclidean => LocalMetric::Euclidean,
        },
        normalize_by_path: !args.no_path_normalization,
    };
    let report = same_different_eval_dtw(&items, &cfg, args.mode.into())?;
    write_eval_outputs(&args.out, &report)
}

fn run_features_extract(args: &FeaturesExtractArgs) -> Result<(), RunnerError> {
    let segments = load_alignments(&args.alignments)?;
    if segments.is_empty() {
        return Err(RunnerError::Invalid("alignment file has no segments".into()));
    }
    let cfg = MfccConfig {
        n_ceps: args.n_ceps,
        n_mels: args.n_mels,
        cmvn: !args.no_cmvn,
        first_coefficient: if args.log_energy {
            FirstCoefficient::LogEnergy
        } else {
            FirstCoefficient::C0
        },
        ..MfccConfig::default()
    };
    let utterances: BTreeSet<&str> = segments.iter().map(|s| s.utterance_id.as_str()).collect();
    let mut by_utterance = std::collections::HashMap::new();
    for utt in utterances {
        let wav = read_wav(&args.wav_dir.join(format!("{utt}.wav")))?;
        by_utterance.insert(utt.to_string(), mfcc(&wav, &cfg)?);
    }
    let mut entries = Vec::with_capacity(segments.len());
    for seg in &segments {
        let full = &by_utterance[&seg.utterance_id];
        let sliced = slice_segment(full, seg.start_frame, seg.end_frame)?;
        entries.push((seg.segment_id.clone(), sliced));
    }
    let archive = FeatureArchive::from_entries(entries)?;
    fs::create_dir_all(&args.out)?;
    let path = args.out.join("features.awef");
    write_archive(&path, &archive)?;
    println!(
        "extracted {} segments ({} utterances, dim {}) to {}",
        archive.len(),
        by_utterance.len(),
        archive.dim(),
        path.display()
    );
    Ok(())
}

fn run_corpus_pairs(args: &CorpusPairsArgs) -> Result<(), RunnerError> {
    let segments = load_alignments(&args.alignments)?;
    let sample = sample_true_pairs(&segments, args.n, args.seed)?;
    fs::create_dir_all(&args.out)?;
    let path = args.out.join("pairs.txt");
    write_pairs(&path, &sample.list)?;
    println!(
        "sampled {} of {} possible pairs to {}",
        sample.list.len(),
        sample.available,
        path.display()
    );
    Ok(())
}

fn run_synth_generate(args: &SynthGenerateArgs) -> Result<(), RunnerError> {
    let (spec, preset_name) = match args.preset {
        CorpusPreset::Default => (default_corpus_spec(args.corpus_seed).0, "default"),
        CorpusPreset::Family => (family_corpus_spec(args.corpus_seed).0, "family"),
    };
    let corpus = gen_corpus(&spec)?;
    fs::create_dir_all(&args.out)?;
    write_archive(&args.out.join("archive.awef"), &corpus.archive)?;
    write_alignments(&args.out.join("alignments.txt"), &corpus.segments)?;
    if let Some(lang) = &args.pairs_language {
        let subset: Vec<WordSegment> = corpus
            .segments
            .iter()
            .filter(|s| &s.language == lang)
            .cloned()
            .collect();
        if subset.is_empty() {
            return Err(RunnerError::Invalid(format!("no segments of language `{lang}`")));
        }
        let pairs = utd_pairs(&subset, args.pairs, args.false_fraction, args.pairs_seed)?;
        write_pairs(&args.out.join("pairs.txt"), &pairs)?;
    }
    let manifest = serde_json::json!({
        "kind": "synth",
        "version": env!("CARGO_PKG_VERSION"),
        "preset": preset_name,
        "corpus_seed": args.corpus_seed,
        "languages": spec.languages.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>(),
        "speakers_per_language": spec.speakers_per_language,
        "instances_per_word": spec.instances_per_word,
        "pairs_language": args.pairs_language,
        "pairs": args.pairs_language.as_ref().map(|_| args.pairs),
        "false_fraction": args.pairs_language.as_ref().map(|_| args.false_fraction),
        "pairs_seed": args.pairs_language.as_ref().map(|_| args.pairs_seed),
    });
    fs::write(
        args.out.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    println!(
        "generated {} segments across {} languages under {}",
        corpus.segments.len(),
        spec.languages.len(),
        args.out.display()
    );
    Ok(())
}

fn run_xpr(cmd: &XprCommand) -> Result<(), RunnerError> {
    match cmd {
        XprCommand::Table {
            common,
            dev_language,
        } => {
            let run = TableRun {
                corpus_seed: common.corpus_seed,
                seeds: common.seeds.clone(),
                scale: load_scale(common.scale.as_deref())?,
                dev_language: dev_language.clone(),
            };
            let result = run_table(&run, &common.out)?;
            for model in &result.models {
                let ap = result.median_mean_ap(model).unwrap_or(f64::NAN);
                println!("{model}: median mean AP {ap:.4}");
            }
            Ok(())
        }
        XprCommand::Ablation {
            common,
            subsets,
            eval_language,
            no_mono_baseline,
        } => {
            let parsed: Vec<Vec<String>> = subsets
                .split(';')
                .filter(|s| !s.trim().is_empty())
                .map(|s| s.split(',').map(|l| l.trim().to_string()).collect())
                .collect();
            let run = AblationRun {
                corpus_seed: common.corpus_seed,
                seeds: common.seeds.clone(),
                scale: load_scale(common.scale.as_deref())?,
                subsets: parsed,
                eval_language: eval_language.clone(),
                mono_baseline: !no_mono_baseline,
            };
            let result = run_ablation(&run, &common.out)?;
            if let Some(ap) = result.median_mono_baseline() {
                println!("mono noisy-pair baseline: median AP {ap:.4}");
            }
            for subset in run.subsets.iter() {
                let label = awe_cli::experiments::subset_label(subset);
                for model in ["cae_rnn", "classifier_rnn"] {
                    let ap = result.median_ap(&label, model).unwrap_or(f64::NAN);
                    println!("{label} {model}: median AP {ap:.4}");
                }
            }
            Ok(())
        }
        XprCommand::Crossmatrix { common } => {
            let run = CrossmatrixRun {
                corpus_seed: common.corpus_seed,
                seeds: common.seeds.clone(),
                scale: load_scale(common.scale.as_deref())?,
            };
            let result = run_crossmatrix(&run, &common.out)?;
            for train in &result.train_languages {
                for eval in &result.eval_languages {
                    let ap = result.median_ap(train, eval).unwrap_or(f64::NAN);
                    println!("train {train} -> eval {eval}: median AP {ap:.4}");
                }
            }
            Ok(())
        }
    }
}

fn run(cli: &Cli) -> Result<(), RunnerError> {
    match &cli.command {
        Command::Features {
            command: FeaturesCommand::Extract(args),
        } => run_features_extract(args),
        Command::Corpus {
            command: CorpusCommand::Pairs(args),
        } => run_corpus_pairs(args),
        Command::Synth {
            command: SynthCommand::Generate(args),
        } => run_synth_generate(args),
        Command::Train { command } => {
            let precision = match command {
                TrainCommand::Ae(a) => a.common.precision,
                TrainCommand::Cae(a) => a.common.precision,
                TrainCommand::Classifier(a) => a.common.precision,
            };
            match precision {
                Precision::F32 => run_train::<f32>(command),
                Precision::F64 => run_train::<f64>(command),
            }
        }
        Command::Embed(args) => run_embed(args),
        Command::Eval { command } => match command {
            EvalCommand::Samediff(args) => run_eval_samediff(args),
            EvalCommand::Dtw(args) => run_eval_dtw(args),
        },
        Command::Xpr { command } => run_xpr(command),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
