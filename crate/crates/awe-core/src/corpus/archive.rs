//! The feature archive: random-access storage for per-utterance feature
//! matrices (and, with T=1 rows, embeddings).
//!
//! Layout (integers little-endian, floats IEEE-754):
//!
//! ```text
//! magic        "AWEF" (4 bytes)
//! u32          format version (1)
//! u32          feature dimension D
//! f64          frame shift in seconds
//! u64          absolute offset of the index
//! records      concatenated T x D f32 matrices, row-major
//! index        u64 record count, then per record:
//!              u16 id length, id (UTF-8), u64 record offset, u32 T
//! ```
//!
//! Frames are stored in 32-bit precision; a round trip through disk is
//! bit-exact for data that is already 32-bit.

use std::collections::HashMap;
use std::path::Path;

use super::CorpusError;
use crate::features::FeatureSequence;

const MAGIC: &[u8; 4] = b"AWEF";
const VERSION: u32 = 1;

#[derive(Clone, Debug)]
pub struct FeatureArchive {
    dim: usize,
    frame_shift: f64,
    ids: Vec<String>,
    map: HashMap<String, FeatureSequence>,
}

impl FeatureArchive {
    /// Build an in-memory archive, checking id uniqueness and uniform shape.
    pub fn from_entries(
        entries: Vec<(String, FeatureSequence)>,
    ) -> Result<Self, CorpusError> {
        let Some((_, first)) = entries.first() else {
            return Err(CorpusError::CorruptIndex("archive has no records".into()));
        };
        let dim = first.dim();
        let frame_shift = first.frame_shift();
        let mut ids = Vec::with_capacity(entries.len());
        let mut map = HashMap::with_capacity(entries.len());
        for (id, f) in entries {
            if f.dim() != dim {
                return Err(CorpusError::InconsistentDim {
                    expected: dim,
                    got: f.dim(),
                });
            }
            if f.frame_shift() != frame_shift {
                return Err(CorpusError::CorruptIndex(format!(
                    "frame shift {} differs from archive value {}",
                    f.frame_shift(),
                    frame_shift
                )));
            }
            if map.insert(id.clone(), f).is_some() {
                return Err(CorpusError::DuplicateSegment(id));
            }
            ids.push(id);
        }
        Ok(FeatureArchive {
            dim,
            frame_shift,
            ids,
            map,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn frame_shift(&self) -> f64 {
        self.frame_shift
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn get(&self, id: &str) -> Option<&FeatureSequence> {
        self.map.get(id)
    }

    /// Entries in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &FeatureSequence)> {
        self.ids
            .iter()
            .map(|id| (id.as_str(), &self.map[id]))
    }
}

pub fn write_archive(path: &Path, archive: &FeatureArchive) -> Result<(), CorpusError> {
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(archive.dim as u32).to_le_bytes());
    buf.extend_from_slice(&archive.frame_shift.to_le_bytes());
    let index_offset_pos = buf.len();
    buf.extend_from_slice(&0u64.to_le_bytes()); // patched below

    let mut index: Vec<(u64, u32)> = Vec::with_capacity(archive.len());
    for (_, f) in archive.iter() {
        index.push((buf.len() as u64, f.t() as u32));
        for &v in f.data() {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    let index_offset = buf.len() as u64;
    buf[index_offset_pos..index_offset_pos + 8].copy_from_slice(&index_offset.to_le_bytes());
    buf.extend_from_slice(&(archive.len() as u64).to_le_bytes());
    for (id, (offset, t)) in archive.ids.iter().zip(index) {
        buf.extend_from_slice(&(id.len() as u16).to_le_bytes());
        buf.extend_from_slice(id.as_bytes());
        buf.extend_from_slice(&offset.to_le_bytes());
        buf.extend_from_slice(&t.to_le_bytes());
    }
    std::fs::write(path, buf)?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CorpusError> {
        if self.pos + n > self.bytes.len() {
            return Err(CorpusError::CorruptIndex(format!(
                "need {n} bytes at offset {}, file has {}",
                self.pos,
                self.bytes.len()
            )));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u16(&mut self) -> Result<u16, CorpusError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, CorpusError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, CorpusError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, CorpusError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn read_archive(path: &Path) -> Result<FeatureArchive, CorpusError> {
    let bytes = std::fs::read(path)?;
    let mut c = Cursor {
        bytes: &bytes,
        pos: 0,
    };
    if c.take(4)? != MAGIC {
        return Err(CorpusError::BadMagic);
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(CorpusError::VersionMismatch(version));
    }
    let dim = c.u32()? as usize;
    if dim == 0 {
        return Err(CorpusError::CorruptIndex("dimension 0".into()));
    }
    let frame_shift = c.f64()?;
    let index_offset = c.u64()? as usize;
    if index_offset > bytes.len() {
        return Err(CorpusError::CorruptIndex(format!(
            "index offset {index_offset} beyond file end {}",
            bytes.len()
        )));
    }
    let mut idx = Cursor {
        bytes: &bytes,
        pos: index_offset,
    };
    let count = idx.u64()? as usize;
    let mut ids = Vec::with_capacity(count);
    let mut map = HashMap::with_capacity(count);
    for _ in 0..count {
        let id_len = idx.u16()? as usize;
        let id = String::from_utf8(idx.take(id_len)?.to_vec())
            .map_err(|_| CorpusError::CorruptIndex("record id is not UTF-8".into()))?;
        let offset = idx.u64()? as usize;
        let t = idx.u32()? as usize;
        if t == 0 {
            return Err(CorpusError::CorruptIndex(format!("record `{id}` has T=0")));
        }
        let data_len = t * dim * 4;
        if offset + data_len > index_offset {
            return Err(CorpusError::CorruptIndex(format!(
                "record `{id}` spans past the index"
            )));
        }
        let data: Vec<f64> = bytes[offset..offset + data_len]
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
            .collect();
        if map
            .insert(id.clone(), FeatureSequence::new(dim, frame_shift, data))
            .is_some()
        {
            return Err(CorpusError::DuplicateSegment(id));
        }
        ids.push(id);
    }
    Ok(FeatureArchive {
        dim,
        frame_shift,
        ids,
        map,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn f32_rows(rng: &mut ChaCha8Rng, t: usize, d: usize) -> Vec<Vec<f64>> {
        (0..t)
            .map(|_| {
                (0..d)
                    .map(|_| rng.gen_range(-10.0f32..10.0) as f64)
                    .collect()
            })
            .collect()
    }

    fn demo_archive() -> FeatureArchive {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let entries = vec![
            (
                "utt1".to_string(),
                FeatureSequence::from_rows(&f32_rows(&mut rng, 5, 13), 0.01),
            ),
            (
                "utt2".to_string(),
                FeatureSequence::from_rows(&f32_rows(&mut rng, 7, 13), 0.01),
            ),
        ];
        FeatureArchive::from_entries(entries).unwrap()
    }

    #[test]
    fn roundtrip_is_bit_exact_and_reports_shapes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.awef");
        let archive = demo_archive();
        write_archive(&path, &archive).unwrap();
        let back = read_archive(&path).unwrap();
        assert_eq!(back.dim(), 13);
        assert_eq!(back.frame_shift(), 0.01);
        assert_eq!(back.ids(), archive.ids());
        assert_eq!(back.get("utt1").unwrap().t(), 5);
        assert_eq!(back.get("utt2").unwrap().t(), 7);
        for (id, f) in archive.iter() {
            assert_eq!(back.get(id).unwrap().data(), f.data());
        }
        // Second write produces identical bytes.
        let path2 = dir.path().join("b.awef");
        write_archive(&path2, &back).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&path2).unwrap());
    }

    #[test]
    fn truncation_detected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.awef");
        write_archive(&path, &demo_archive()).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        for cut in [10, bytes.len() / 2, bytes.len() - 3] {
            std::fs::write(&path, &bytes[..cut]).unwrap();
            assert!(read_archive(&path).is_err(), "cut at {cut} not detected");
        }
    }

    #[test]
    fn wrong_magic_and_version_detected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.awef");
        write_archive(&path, &demo_archive()).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        let orig = bytes.clone();
        bytes[0] = b'X';
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_archive(&path), Err(CorpusError::BadMagic)));
        bytes = orig;
        bytes[4] = 9;
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            read_archive(&path),
            Err(CorpusError::VersionMismatch(9))
        ));
    }

    #[test]
    fn mixed_dimensions_rejected() {
        let e = FeatureArchive::from_entries(vec![
            ("a".into(), FeatureSequence::from_rows(&[vec![1.0, 2.0]], 0.01)),
            ("b".into(), FeatureSequence::from_rows(&[vec![1.0]], 0.01)),
        ]);
        assert!(matches!(e, Err(CorpusError::InconsistentDim { .. })));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let f = FeatureSequence::from_rows(&[vec![1.0]], 0.01);
        let e = FeatureArchive::from_entries(vec![
            ("a".into(), f.clone()),
            ("a".into(), f),
        ]);
        assert!(matches!(e, Err(CorpusError::DuplicateSegment(_))));
    }

    #[test]
    fn randomized_roundtrips() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for case in 0..100 {
            let d = rng.gen_range(1..20);
            let n = rng.gen_range(1..8);
            let entries: Vec<(String, FeatureSequence)> = (0..n)
                .map(|i| {
                    let t = rng.gen_range(1..12);
                    (
                        format!("utt{case}_{i}"),
                        FeatureSequence::from_rows(&f32_rows(&mut rng, t, d), 0.01),
                    )
                })
                .collect();
            let archive = FeatureArchive::from_entries(entries).unwrap();
            let path = dir.path().join(format!("{case}.awef"));
            write_archive(&path, &archive).unwrap();
            let back = read_archive(&path).unwrap();
            assert_eq!(back.ids(), archive.ids());
            for (id, f) in archive.iter() {
                let g = back.get(id).unwrap();
                assert_eq!(g.data(), f.data());
                assert_eq!(g.t(), f.t());
            }
        }
    }
}
