//! Scratch calibration probe: train the multilingual CAE (or the noisy
//! monolingual CAE with mode `mono`) at a given size and report AP.
//!
//! Usage: probe <hidden> <embed> <cae_epochs> <pairs_per_lang> <pretrain> [lr] [mode] [dec_layers]

use awe_core::corpus::{build_vocabulary, sample_true_pairs, PairList, PairSource, WordSegment};
use awe_core::grad::ArchDescriptor;
use awe_core::models::{embed_all, train_ae, train_cae, train_classifier, TrainConfig, TrainingSegment};
use awe_core::samediff::{same_different_eval, EvalMode, LabeledEmbedding};
use awe_core::synth::{gen_corpus, utd_pairs};
use awe_cli::corpora::{default_corpus_spec, instance_index};
use std::collections::BTreeSet;
use std::collections::HashMap;
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let hidden: usize = args[1].parse().unwrap();
    let embed: usize = args[2].parse().unwrap();
    let epochs: usize = args[3].parse().unwrap();
    let pairs_n: usize = args[4].parse().unwrap();
    let pretrain: usize = args[5].parse().unwrap();
    let lr: f64 = args.get(6).map_or(1e-3, |s| s.parse().unwrap());
    let mode = args.get(7).map_or("multi", |s| s.as_str());
    let dec_layers: usize = args.get(8).map_or(2, |s| s.parse().unwrap());

    let (spec, roles) = default_corpus_spec(0);
    let corpus = gen_corpus(&spec).unwrap();
    let mut train_tokens: HashMap<String, Vec<WordSegment>> = HashMap::new();
    let mut test_tokens: HashMap<String, Vec<WordSegment>> = HashMap::new();
    for seg in &corpus.segments {
        let idx = instance_index(seg).unwrap();
        let bucket = if idx < 3 { &mut train_tokens } else { &mut test_tokens };
        bucket.entry(seg.language.clone()).or_default().push(seg.clone());
    }
    let items = |segs: &[WordSegment]| -> Vec<TrainingSegment> {
        segs.iter()
            .map(|seg| TrainingSegment {
                segment: seg.clone(),
                features: corpus.archive.get(&seg.segment_id).unwrap().clone(),
            })
            .collect()
    };

    if mode == "base" {
        for lang in ["zr0", "zr1", "zr2"] {
            let segs = &test_tokens[lang];
            let down: Vec<LabeledEmbedding> = segs
                .iter()
                .map(|s| LabeledEmbedding {
                    vector: awe_core::models::downsample_embed(
                        corpus.archive.get(&s.segment_id).unwrap(),
                        10,
                    ),
                    word_type: s.word_type.clone().unwrap(),
                    speaker: s.speaker.clone(),
                })
                .collect();
            let all = same_different_eval(&down, EvalMode::All).unwrap().ap;
            println!("{lang}: down all {all:.3}");
        }
        return;
    }

    let mut arch = ArchDescriptor {
        input_dim: 13,
        hidden_units: hidden,
        encoder_layers: 2,
        decoder_layers: dec_layers,
        embed_dim: embed,
        n_classes: None,
    };
    let cfg = TrainConfig {
        epochs,
        batch_size: 32,
        learning_rate: lr,
        clip_norm: 5.0,
        pretrain_epochs: pretrain,
        seed: 0,
    };
    let t0 = Instant::now();
    let outcome = match mode {
        "mono" => {
            let toks = &train_tokens["zr0"];
            let sampled = utd_pairs(toks, pairs_n, 0.3, 42).unwrap();
            train_cae::<f32>(&items(toks), &sampled, &arch, &cfg).unwrap()
        }
        "ae" => {
            let toks = &train_tokens["zr0"];
            let sampled = utd_pairs(toks, pairs_n, 0.3, 42).unwrap();
            let mut seen = BTreeSet::new();
            let mut segs = Vec::new();
            for (a, b) in &sampled.pairs {
                for id in [a, b] {
                    if seen.insert(id.clone()) {
                        segs.push(toks.iter().find(|s| &s.segment_id == id).unwrap().clone());
                    }
                }
            }
            let mut c = cfg.clone();
            c.pretrain_epochs = 0;
            train_ae::<f32>(&items(&segs), &arch, &c).unwrap()
        }
        "cls" => {
            let mut multi_items = Vec::new();
            for lang in &roles.train {
                multi_items.extend(items(&train_tokens[lang]));
            }
            let segs: Vec<WordSegment> = multi_items.iter().map(|i| i.segment.clone()).collect();
            let vocab = build_vocabulary(&segs, usize::MAX);
            arch.n_classes = Some(vocab.k());
            let mut c = cfg.clone();
            c.pretrain_epochs = 0;
            train_classifier::<f32>(&multi_items, &vocab, &arch, &c).unwrap()
        }
        _ => {
            let mut multi_items = Vec::new();
            let mut pooled = Vec::new();
            for lang in &roles.train {
                let toks = &train_tokens[lang];
                multi_items.extend(items(toks));
                pooled.extend(sample_true_pairs(toks, pairs_n, 42).unwrap().list.pairs);
            }
            let pairs = PairList { pairs: pooled, source: PairSource::True };
            train_cae::<f32>(&multi_items, &pairs, &arch, &cfg).unwrap()
        }
    };
    let train_time = t0.elapsed().as_secs_f64();
    println!(
        "trained {:.1}s; pretrain {:?} -> loss {:?}",
        train_time,
        outcome.pretrain_trace.iter().map(|v| (v * 10.0).round() / 10.0).collect::<Vec<_>>(),
        outcome
            .loss_trace
            .iter()
            .map(|v| (v * 10.0).round() / 10.0)
            .collect::<Vec<_>>()
    );

    let labeled_embeddings = |lang: &str| -> Vec<LabeledEmbedding> {
        let segs = &test_tokens[lang];
        let inputs: Vec<(String, awe_core::features::FeatureSequence)> = segs
            .iter()
            .map(|s| (s.segment_id.clone(), corpus.archive.get(&s.segment_id).unwrap().clone()))
            .collect();
        let embs = embed_all(&outcome.model, &inputs).unwrap();
        embs.into_iter()
            .zip(segs)
            .map(|(e, s)| LabeledEmbedding {
                vector: e.vector,
                word_type: s.word_type.clone().unwrap(),
                speaker: s.speaker.clone(),
            })
            .collect()
    };
    let eval = |lang: &str| -> (f64, f64) {
        let labeled = labeled_embeddings(lang);
        (
            same_different_eval(&labeled, EvalMode::All).unwrap().ap,
            same_different_eval(&labeled, EvalMode::Swdp).unwrap().ap,
        )
    };

    if mode == "diag" {
        for lang in ["zr0", "zr1", "wr0"] {
            let labeled = labeled_embeddings(lang);
            let all = same_different_eval(&labeled, EvalMode::All).unwrap().ap;
            let swdp = same_different_eval(&labeled, EvalMode::Swdp).unwrap().ap;
            let speakers: BTreeSet<String> = labeled.iter().map(|l| l.speaker.clone()).collect();
            let within: Vec<f64> = speakers
                .iter()
                .map(|spk| {
                    let sub: Vec<LabeledEmbedding> = labeled
                        .iter()
                        .filter(|l| &l.speaker == spk)
                        .cloned()
                        .collect();
                    same_different_eval(&sub, EvalMode::All).unwrap().ap
                })
                .collect();
            let mean_within = within.iter().sum::<f64>() / within.len() as f64;
            let down: Vec<LabeledEmbedding> = {
                let segs = &test_tokens[lang];
                segs.iter()
                    .map(|s| LabeledEmbedding {
                        vector: awe_core::models::downsample_embed(
                            corpus.archive.get(&s.segment_id).unwrap(),
                            10,
                        ),
                        word_type: s.word_type.clone().unwrap(),
                        speaker: s.speaker.clone(),
                    })
                    .collect()
            };
            let down_within: Vec<f64> = speakers
                .iter()
                .map(|spk| {
                    let sub: Vec<LabeledEmbedding> =
                        down.iter().filter(|l| &l.speaker == spk).cloned().collect();
                    same_different_eval(&sub, EvalMode::All).unwrap().ap
                })
                .collect();
            let down_all = same_different_eval(&down, EvalMode::All).unwrap().ap;
            let down_swdp = same_different_eval(&down, EvalMode::Swdp).unwrap().ap;
            println!(
                "{lang}: cae all {all:.3} swdp {swdp:.3} within {mean_within:.3} | down all {down_all:.3} swdp {down_swdp:.3} within {:.3}",
                down_within.iter().sum::<f64>() / down_within.len() as f64
            );
        }
        return;
    }

    let langs: &[&str] = match mode {
        "mono" | "ae" => &["zr0"],
        _ => &["zr0", "zr1", "zr2", "wr0", "wr1"],
    };
    for lang in langs {
        let (all, swdp) = eval(lang);
        println!("{lang}: AP {all:.4} swdp {swdp:.4}");
    }
}
