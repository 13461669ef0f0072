//! Corpus data model: word segments from forced alignments, vocabularies
//! with per-language caps, training pair lists, and the binary feature
//! archive.
//!
//! Text formats are whitespace-separated UTF-8, one record per line; blank
//! lines and lines starting with `#` are skipped. An alignment line is
//!
//! ```text
//! utterance_id start_frame end_frame word_type language speaker
//! ```
//!
//! with the literal word `UNKNOWN` marking unlabeled segments (discovered
//! terms). A pair line is two segment ids. Segment ids are derived as
//! `utterance_id:start:end`.

mod archive;
mod pairs;

pub use archive::{read_archive, write_archive, FeatureArchive};
pub use pairs::{sample_true_pairs, TruePairSample};

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unknown segment id `{id}` at line {line}")]
    UnknownSegmentId { line: usize, id: String },
    #[error("segment `{id}` paired with itself at line {line}")]
    SelfPair { line: usize, id: String },
    #[error("no word type has two or more segments")]
    NoPairsAvailable,
    #[error("not a feature archive (bad magic)")]
    BadMagic,
    #[error("unsupported archive version {0}")]
    VersionMismatch(u32),
    #[error("corrupt archive index: {0}")]
    CorruptIndex(String),
    #[error("duplicate segment id `{0}`")]
    DuplicateSegment(String),
    #[error("feature dimension {got} differs from archive dimension {expected}")]
    InconsistentDim { expected: usize, got: usize },
}

pub const UNKNOWN_WORD: &str = "UNKNOWN";

/// A word token: a frame span of one utterance, with its label (if any),
/// language and speaker.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WordSegment {
    pub segment_id: String,
    pub utterance_id: String,
    pub start_frame: usize,
    pub end_frame: usize,
    /// `None` for discovered segments without a label.
    pub word_type: Option<String>,
    pub language: String,
    pub speaker: String,
}

impl WordSegment {
    pub fn new(
        utterance_id: &str,
        start_frame: usize,
        end_frame: usize,
        word_type: Option<&str>,
        language: &str,
        speaker: &str,
    ) -> Result<Self, CorpusError> {
        if start_frame >= end_frame {
            return Err(CorpusError::Parse {
                line: 0,
                msg: format!("segment span [{start_frame}, {end_frame}) is empty"),
            });
        }
        if word_type == Some("") {
            return Err(CorpusError::Parse {
                line: 0,
                msg: "labeled segment with empty word type".into(),
            });
        }
        Ok(WordSegment {
            segment_id: format!("{utterance_id}:{start_frame}:{end_frame}"),
            utterance_id: utterance_id.to_string(),
            start_frame,
            end_frame,
            word_type: word_type.map(str::to_string),
            language: language.to_string(),
            speaker: speaker.to_string(),
        })
    }

    pub fn n_frames(&self) -> usize {
        self.end_frame - self.start_frame
    }
}

/// Segments with O(1) lookup by id, preserving load order.
#[derive(Clone, Debug, Default)]
pub struct SegmentTable {
    segments: Vec<WordSegment>,
    by_id: HashMap<String, usize>,
}

impl SegmentTable {
    pub fn from_segments(segments: Vec<WordSegment>) -> Result<Self, CorpusError> {
        let mut by_id = HashMap::with_capacity(segments.len());
        for (i, s) in segments.iter().enumerate() {
            if by_id.insert(s.segment_id.clone(), i).is_some() {
                return Err(CorpusError::DuplicateSegment(s.segment_id.clone()));
            }
        }
        Ok(SegmentTable { segments, by_id })
    }

    pub fn get(&self, id: &str) -> Option<&WordSegment> {
        self.by_id.get(id).map(|&i| &self.segments[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.by_id.contains_key(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &WordSegment> {
        self.segments.iter()
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn segments(&self) -> &[WordSegment] {
        &self.segments
    }
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

/// Parse an alignment file into segments, order preserved.
pub fn load_alignments(path: &Path) -> Result<Vec<WordSegment>, CorpusError> {
    let text = std::fs::read_to_string(path)?;
    parse_alignments(&text)
}

pub fn parse_alignments(text: &str) -> Result<Vec<WordSegment>, CorpusError> {
    let mut out = Vec::new();
    for (line, l) in content_lines(text) {
        let fields: Vec<&str> = l.split_whitespace().collect();
        if fields.len() != 6 {
            return Err(CorpusError::Parse {
                line,
                msg: format!("expected 6 fields, got {}", fields.len()),
            });
        }
        let parse_idx = |s: &str, what: &str| -> Result<usize, CorpusError> {
            s.parse().map_err(|_| CorpusError::Parse {
                line,
                msg: format!("bad {what} `{s}`"),
            })
        };
        let start = parse_idx(fields[1], "start frame")?;
        let end = parse_idx(fields[2], "end frame")?;
        let word = if fields[3] == UNKNOWN_WORD {
            None
        } else {
            Some(fields[3])
        };
        let seg = WordSegment::new(fields[0], start, end, word, fields[4], fields[5])
            .map_err(|e| match e {
                CorpusError::Parse { msg, .. } => CorpusError::Parse { line, msg },
                other => other,
            })?;
        out.push(seg);
    }
    Ok(out)
}

pub fn write_alignments(path: &Path, segments: &[WordSegment]) -> Result<(), CorpusError> {
    let mut text = String::new();
    for s in segments {
        let word = s.word_type.as_deref().unwrap_or(UNKNOWN_WORD);
        writeln!(
            text,
            "{} {} {} {} {} {}",
            s.utterance_id, s.start_frame, s.end_frame, word, s.language, s.speaker
        )
        .expect("writing to string");
    }
    std::fs::write(path, text)?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairSource {
    /// Discovered by an unsupervised term discovery system (noisy).
    Utd,
    /// Sampled from ground-truth labels.
    True,
}

/// Ordered list of segment-id pairs used for correspondence training.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairList {
    pub pairs: Vec<(String, String)>,
    pub source: PairSource,
}

impl PairList {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Parse a pair file, validating every id against `table`.
pub fn load_pairs(
    path: &Path,
    source: PairSource,
    table: &SegmentTable,
) -> Result<PairList, CorpusError> {
    let text = std::fs::read_to_string(path)?;
    parse_pairs(&text, source, table)
}

pub fn parse_pairs(
    text: &str,
    source: PairSource,
    table: &SegmentTable,
) -> Result<PairList, CorpusError> {
    let mut pairs = Vec::new();
    for (line, l) in content_lines(text) {
        let fields: Vec<&str> = l.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(CorpusError::Parse {
                line,
                msg: format!("expected 2 segment ids, got {} fields", fields.len()),
            });
        }
        for id in &fields {
            if !table.contains(id) {
                return Err(CorpusError::UnknownSegmentId {
                    line,
                    id: id.to_string(),
                });
            }
        }
        if fields[0] == fields[1] {
            return Err(CorpusError::SelfPair {
                line,
                id: fields[0].to_string(),
            });
        }
        pairs.push((fields[0].to_string(), fields[1].to_string()));
    }
    Ok(PairList { pairs, source })
}

pub fn write_pairs(path: &Path, list: &PairList) -> Result<(), CorpusError> {
    let mut text = String::new();
    for (a, b) in &list.pairs {
        writeln!(text, "{a} {b}").expect("writing to string");
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// Word classes for classifier training. The vocabulary is joint over
/// languages: the same spelling in two languages is two classes.
#[derive(Clone, Debug)]
pub struct Vocabulary {
    entries: Vec<(String, String)>, // (language, word_type), index = class
    index: HashMap<(String, String), usize>,
}

impl Vocabulary {
    pub fn k(&self) -> usize {
        self.entries.len()
    }

    pub fn class_of(&self, language: &str, word_type: &str) -> Option<usize> {
        self.index
            .get(&(language.to_string(), word_type.to_string()))
            .copied()
    }

    /// (language, word_type) for a class index.
    pub fn entry(&self, class: usize) -> &(String, String) {
        &self.entries[class]
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }
}

/// Keep the `cap_per_language` most frequent word types per language (ties
/// broken by lexicographically smaller word) and assign dense class indices
/// ordered by (language, frequency desc, word).
pub fn build_vocabulary(segments: &[WordSegment], cap_per_language: usize) -> Vocabulary {
    let mut counts: HashMap<(&str, &str), usize> = HashMap::new();
    for s in segments {
        if let Some(w) = &s.word_type {
            *counts.entry((s.language.as_str(), w.as_str())).or_default() += 1;
        }
    }
    let mut per_lang: HashMap<&str, Vec<(&str, usize)>> = HashMap::new();
    for ((lang, word), n) in counts {
        per_lang.entry(lang).or_default().push((word, n));
    }
    let mut languages: Vec<&str> = per_lang.keys().copied().collect();
    languages.sort_unstable();
    let mut entries = Vec::new();
    for lang in languages {
        let mut words = per_lang.remove(lang).expect("key from map");
        words.sort_unstable_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        words.truncate(cap_per_language);
        for (word, _) in words {
            entries.push((lang.to_string(), word.to_string()));
        }
    }
    let index = entries
        .iter()
        .enumerate()
        .map(|(i, e)| (e.clone(), i))
        .collect();
    Vocabulary { entries, index }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(utt: &str, start: usize, end: usize, word: &str, lang: &str, spk: &str) -> WordSegment {
        WordSegment::new(utt, start, end, Some(word), lang, spk).unwrap()
    }

    #[test]
    fn alignment_line_parses_per_format() {
        let segs = parse_alignments("u1 12 40 perro ES spk3\n").unwrap();
        assert_eq!(segs.len(), 1);
        let s = &segs[0];
        assert_eq!(s.segment_id, "u1:12:40");
        assert_eq!((s.start_frame, s.end_frame), (12, 40));
        assert_eq!(s.word_type.as_deref(), Some("perro"));
        assert_eq!((s.language.as_str(), s.speaker.as_str()), ("ES", "spk3"));
    }

    #[test]
    fn empty_file_gives_empty_list() {
        assert!(parse_alignments("").unwrap().is_empty());
        assert!(parse_alignments("\n# comment only\n\n").unwrap().is_empty());
    }

    #[test]
    fn inverted_span_is_a_parse_error() {
        let err = parse_alignments("u1 40 12 perro ES spk3\n").unwrap_err();
        assert!(matches!(err, CorpusError::Parse { line: 1, .. }));
        let err = parse_alignments("ok 1 2 w L s\nu1 5 5 w L s\n").unwrap_err();
        assert!(matches!(err, CorpusError::Parse { line: 2, .. }));
    }

    #[test]
    fn unknown_marker_maps_to_unlabeled() {
        let segs = parse_alignments("u1 0 9 UNKNOWN ZH spk1\n").unwrap();
        assert_eq!(segs[0].word_type, None);
    }

    #[test]
    fn alignments_roundtrip_through_text() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ali.txt");
        let segs = vec![
            seg("u1", 0, 5, "casa", "ES", "a"),
            WordSegment::new("u2", 3, 9, None, "ES", "b").unwrap(),
        ];
        write_alignments(&path, &segs).unwrap();
        assert_eq!(load_alignments(&path).unwrap(), segs);
    }

    #[test]
    fn pair_parsing_validates_ids_and_self_pairs() {
        let table = SegmentTable::from_segments(vec![
            seg("u1", 0, 5, "a", "L", "s"),
            seg("u2", 0, 5, "a", "L", "s"),
        ])
        .unwrap();
        let list = parse_pairs("u1:0:5 u2:0:5\nu2:0:5 u1:0:5\n", PairSource::Utd, &table).unwrap();
        assert_eq!(list.len(), 2);
        assert_eq!(list.source, PairSource::Utd);

        let err = parse_pairs("u1:0:5 nope\n", PairSource::Utd, &table).unwrap_err();
        assert!(matches!(err, CorpusError::UnknownSegmentId { line: 1, .. }));
        let err = parse_pairs("u1:0:5 u1:0:5\n", PairSource::Utd, &table).unwrap_err();
        assert!(matches!(err, CorpusError::SelfPair { line: 1, .. }));
    }

    #[test]
    fn duplicate_segment_ids_rejected() {
        let e = SegmentTable::from_segments(vec![
            seg("u1", 0, 5, "a", "L", "s"),
            seg("u1", 0, 5, "b", "L", "s"),
        ]);
        assert!(matches!(e, Err(CorpusError::DuplicateSegment(_))));
    }

    #[test]
    fn vocabulary_caps_and_orders_classes() {
        let mut segs = Vec::new();
        // Language A: x appears 3 times, m and z twice (tie), q once.
        for (i, w) in ["x", "x", "x", "z", "z", "m", "m", "q"].iter().enumerate() {
            segs.push(seg(&format!("a{i}"), 0, 2, w, "A", "s"));
        }
        // Language B: only w once.
        segs.push(seg("b0", 0, 2, "w", "B", "s"));
        let vocab = build_vocabulary(&segs, 3);
        // A keeps x (3), then tie m/z broken lexicographically; q dropped.
        assert_eq!(vocab.k(), 4);
        assert_eq!(vocab.entry(0), &("A".to_string(), "x".to_string()));
        assert_eq!(vocab.entry(1), &("A".to_string(), "m".to_string()));
        assert_eq!(vocab.entry(2), &("A".to_string(), "z".to_string()));
        assert_eq!(vocab.entry(3), &("B".to_string(), "w".to_string()));
        assert_eq!(vocab.class_of("A", "q"), None);
        // Bijection onto 0..K-1.
        for k in 0..vocab.k() {
            let (l, w) = vocab.entry(k).clone();
            assert_eq!(vocab.class_of(&l, &w), Some(k));
        }
    }

    #[test]
    fn vocabulary_below_cap_keeps_everything() {
        let segs = vec![seg("u1", 0, 2, "a", "L", "s"), seg("u2", 0, 2, "b", "L", "s")];
        assert_eq!(build_vocabulary(&segs, 10).k(), 2);
    }

    #[test]
    fn unlabeled_segments_do_not_enter_vocabulary() {
        let segs = vec![
            seg("u1", 0, 2, "a", "L", "s"),
            WordSegment::new("u2", 0, 2, None, "L", "s").unwrap(),
        ];
        assert_eq!(build_vocabulary(&segs, 10).k(), 1);
    }
}
