//! Stock synthetic corpora for the experiment runner: a "default" corpus of
//! distinct languages sharing a common acoustic backbone, split into
//! zero-resource evaluation and well-resourced training sets, and a "family"
//! corpus where each evaluation language has a closely related training
//! language derived from the same parent.

use serde::{Deserialize, Serialize};

use awe_core::corpus::WordSegment;
use awe_core::synth::{CorpusSpec, FamilySpec, InstanceSpec, LanguageSource, LanguageSpec};

/// Which language plays which part in an experiment. Evaluation languages
/// are zero-resource: no model may train on their segments. A dev language,
/// when set, is reserved for tuning and excluded from both sides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LanguageRoles {
    pub eval: Vec<String>,
    pub train: Vec<String>,
    pub dev: Option<String>,
}

impl LanguageRoles {
    /// Drop a language from every role to reserve it for development.
    pub fn reserve_dev(mut self, language: &str) -> Self {
        self.eval.retain(|l| l != language);
        self.train.retain(|l| l != language);
        self.dev = Some(language.to_string());
        self
    }
}

fn base_language(seed: u64) -> LanguageSpec {
    LanguageSpec {
        vocab_size: 30,
        dim: 13,
        t_min: 12,
        t_max: 24,
        smoothness: 1.0,
        seed,
    }
}

fn nuisance() -> InstanceSpec {
    InstanceSpec {
        warp: 0.25,
        offset_scale: 2.0,
        noise: 0.12,
        speaker: String::new(),
    }
}

fn language_seed(corpus_seed: u64, index: u64) -> u64 {
    corpus_seed
        .wrapping_mul(0x9e3779b97f4a7c15)
        .wrapping_add(index.wrapping_mul(0x2545f4914f6cdd1d))
}

/// All default-corpus languages descend from one hidden proto-language with
/// heavy drift and partial vocabulary resampling: distinct languages, but a
/// shared acoustic backbone, the way real languages share phonetics. Sibling
/// template correlation stays low (~1/(1+drift²) on inherited words) while
/// leaving cross-lingual structure for models to pick up.
fn backbone_language(seed: u64, proto: LanguageSpec) -> LanguageSource {
    LanguageSource::Derived(FamilySpec {
        parent: proto,
        drift: 1.0,
        resample_fraction: 0.12,
        seed,
    })
}

/// Six zero-resource evaluation languages and seven well-resourced training
/// languages over a common backbone; 30 words, 6 speakers, 5 instances per
/// word.
pub fn default_corpus_spec(seed: u64) -> (CorpusSpec, LanguageRoles) {
    let proto = base_language(language_seed(seed, 1000));
    let mut languages = Vec::new();
    let mut roles = LanguageRoles {
        eval: Vec::new(),
        train: Vec::new(),
        dev: None,
    };
    for i in 0..6u64 {
        let name = format!("zr{i}");
        languages.push((
            name.clone(),
            backbone_language(language_seed(seed, i), proto.clone()),
        ));
        roles.eval.push(name);
    }
    for i in 0..7u64 {
        let name = format!("wr{i}");
        languages.push((
            name.clone(),
            backbone_language(language_seed(seed, 100 + i), proto.clone()),
        ));
        roles.train.push(name);
    }
    let spec = CorpusSpec {
        languages,
        speakers_per_language: 6,
        instances_per_word: 5,
        instance: nuisance(),
        seed,
    };
    (spec, roles)
}

/// Three evaluation languages, each paired with a training language derived
/// from it (half-shared vocabulary, drifted templates), plus one unrelated
/// training language. Returns the (train, eval) relatedness map as well.
pub fn family_corpus_spec(seed: u64) -> (CorpusSpec, LanguageRoles, Vec<(String, String)>) {
    let mut languages = Vec::new();
    let mut roles = LanguageRoles {
        eval: Vec::new(),
        train: Vec::new(),
        dev: None,
    };
    let mut related = Vec::new();
    for i in 0..3u64 {
        let parent = base_language(language_seed(seed, 200 + i));
        let eval_name = format!("fam{i}");
        let kin_name = format!("fam{i}_kin");
        languages.push((eval_name.clone(), LanguageSource::Fresh(parent.clone())));
        languages.push((
            kin_name.clone(),
            LanguageSource::Derived(FamilySpec {
                parent,
                drift: 0.6,
                resample_fraction: 0.5,
                seed: language_seed(seed, 300 + i),
            }),
        ));
        roles.eval.push(eval_name.clone());
        roles.train.push(kin_name.clone());
        related.push((kin_name, eval_name));
    }
    let far_name = "far0".to_string();
    languages.push((
        far_name.clone(),
        LanguageSource::Fresh(base_language(language_seed(seed, 400))),
    ));
    roles.train.push(far_name);
    let spec = CorpusSpec {
        languages,
        speakers_per_language: 6,
        instances_per_word: 5,
        instance: nuisance(),
        seed,
    };
    (spec, roles, related)
}

/// Instance index encoded in generated utterance ids (the digits after the
/// final `_i`).
pub fn instance_index(segment: &WordSegment) -> Option<usize> {
    let (_, tail) = segment.utterance_id.rsplit_once("_i")?;
    tail.parse().ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use awe_core::synth::gen_corpus;

    #[test]
    fn default_corpus_roles_cover_all_languages() {
        let (spec, roles) = default_corpus_spec(0);
        assert_eq!(spec.languages.len(), 13);
        assert_eq!(roles.eval.len(), 6);
        assert_eq!(roles.train.len(), 7);
        let names: Vec<&String> = spec.languages.iter().map(|(n, _)| n).collect();
        for lang in roles.eval.iter().chain(&roles.train) {
            assert!(names.contains(&lang));
        }
    }

    #[test]
    fn reserve_dev_removes_the_language_everywhere() {
        let (_, roles) = default_corpus_spec(0);
        let roles = roles.reserve_dev("wr6");
        assert_eq!(roles.train.len(), 6);
        assert_eq!(roles.dev.as_deref(), Some("wr6"));
        assert!(!roles.train.contains(&"wr6".to_string()));
    }

    #[test]
    fn family_corpus_links_each_eval_language_to_kin() {
        let (spec, roles, related) = family_corpus_spec(1);
        assert_eq!(spec.languages.len(), 7);
        assert_eq!(related.len(), 3);
        for (train, eval) in &related {
            assert!(roles.train.contains(train));
            assert!(roles.eval.contains(eval));
        }
    }

    #[test]
    fn instance_index_parses_generated_ids() {
        let (spec, _) = default_corpus_spec(2);
        let mut small = spec;
        small.languages.truncate(1);
        small.speakers_per_language = 2;
        small.instances_per_word = 3;
        let corpus = gen_corpus(&small).unwrap();
        let mut seen = [0usize; 3];
        for seg in &corpus.segments {
            seen[instance_index(seg).unwrap()] += 1;
        }
        assert!(seen.iter().all(|&c| c == corpus.segments.len() / 3));
    }
}
