//! Minimal single-channel 16-bit PCM WAV reader/writer and a raw float
//! loader. Only the subset of RIFF needed for speech corpora is supported;
//! unknown chunks are skipped.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{FeatError, Waveform};

pub fn read_wav(path: &Path) -> Result<Waveform, FeatError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut hdr = [0u8; 12];
    r.read_exact(&mut hdr)?;
    if &hdr[0..4] != b"RIFF" || &hdr[8..12] != b"WAVE" {
        return Err(FeatError::Wav("missing RIFF/WAVE header".into()));
    }
    let mut sample_rate = None;
    let mut data: Option<Vec<u8>> = None;
    loop {
        let mut chunk_hdr = [0u8; 8];
        match r.read_exact(&mut chunk_hdr) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(e.into()),
        }
        let id = &chunk_hdr[0..4];
        let size = u32::from_le_bytes(chunk_hdr[4..8].try_into().unwrap()) as usize;
        match id {
            b"fmt " => {
                let mut fmt = vec![0u8; size];
                r.read_exact(&mut fmt)?;
                if fmt.len() < 16 {
                    return Err(FeatError::Wav("fmt chunk too small".into()));
                }
                let format = u16::from_le_bytes([fmt[0], fmt[1]]);
                let channels = u16::from_le_bytes([fmt[2], fmt[3]]);
                let rate = u32::from_le_bytes([fmt[4], fmt[5], fmt[6], fmt[7]]);
                let bits = u16::from_le_bytes([fmt[14], fmt[15]]);
                if format != 1 {
                    return Err(FeatError::Wav(format!("unsupported format {format}")));
                }
                if channels != 1 {
                    return Err(FeatError::Wav(format!("need mono, got {channels} channels")));
                }
                if bits != 16 {
                    return Err(FeatError::Wav(format!("need 16-bit samples, got {bits}")));
                }
                sample_rate = Some(rate);
            }
            b"data" => {
                let mut buf = vec![0u8; size];
                r.read_exact(&mut buf)?;
                data = Some(buf);
            }
            _ => {
                // Skip padding byte for odd-sized chunks per RIFF.
                let skip = size + (size & 1);
                std::io::copy(&mut r.by_ref().take(skip as u64), &mut std::io::sink())?;
            }
        }
    }
    let sample_rate =
        sample_rate.ok_or_else(|| FeatError::Wav("missing fmt chunk".into()))?;
    let data = data.ok_or_else(|| FeatError::Wav("missing data chunk".into()))?;
    if data.len() % 2 != 0 {
        return Err(FeatError::Wav("odd data chunk length".into()));
    }
    let samples: Vec<f64> = data
        .chunks_exact(2)
        .map(|b| i16::from_le_bytes([b[0], b[1]]) as f64 / 32768.0)
        .collect();
    Waveform::new(samples, sample_rate)
}

pub fn write_wav(path: &Path, w: &Waveform) -> Result<(), FeatError> {
    let mut out = BufWriter::new(File::create(path)?);
    let n_bytes = (w.len() * 2) as u32;
    out.write_all(b"RIFF")?;
    out.write_all(&(36 + n_bytes).to_le_bytes())?;
    out.write_all(b"WAVE")?;
    out.write_all(b"fmt ")?;
    out.write_all(&16u32.to_le_bytes())?;
    out.write_all(&1u16.to_le_bytes())?; // PCM
    out.write_all(&1u16.to_le_bytes())?; // mono
    out.write_all(&w.sample_rate().to_le_bytes())?;
    out.write_all(&(w.sample_rate() * 2).to_le_bytes())?; // byte rate
    out.write_all(&2u16.to_le_bytes())?; // block align
    out.write_all(&16u16.to_le_bytes())?;
    out.write_all(b"data")?;
    out.write_all(&n_bytes.to_le_bytes())?;
    for &s in w.samples() {
        let v = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

/// Raw little-endian f32 samples with a caller-supplied rate.
pub fn read_raw_f32(path: &Path, sample_rate: u32) -> Result<Waveform, FeatError> {
    let bytes = std::fs::read(path)?;
    if bytes.len() % 4 != 0 {
        return Err(FeatError::Wav("raw float file length not multiple of 4".into()));
    }
    let samples: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
        .collect();
    Waveform::new(samples, sample_rate)
}
