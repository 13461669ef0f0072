//! Waveform handling and the MFCC front end.
//!
//! The pipeline is preemphasis, Hamming-windowed framing, DFT power spectrum,
//! mel filterbank, floored log, orthonormal type-II DCT, keeping the first 13
//! coefficients, then per-utterance mean/variance normalization (on by
//! default). Everything here is a pure function of its inputs.

mod mfcc;
pub mod wav;

pub use mfcc::{
    cmvn, frame_signal, mfcc, preemphasize, slice_segment, FirstCoefficient, MfccConfig,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FeatError {
    #[error("signal too short: need {needed} samples, got {got}")]
    SignalTooShort { needed: usize, got: usize },
    #[error("frame range [{start}, {end}) out of range for {t} frames")]
    OutOfRange { start: usize, end: usize, t: usize },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("bad wav file: {0}")]
    Wav(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Mono audio in the range [-1, 1).
#[derive(Clone, Debug)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self, FeatError> {
        if sample_rate == 0 {
            return Err(FeatError::InvalidConfig("sample_rate must be > 0".into()));
        }
        if samples.is_empty() {
            return Err(FeatError::SignalTooShort { needed: 1, got: 0 });
        }
        Ok(Waveform {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        false // length >= 1 by construction
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// A T x D matrix of frame-level features, row-major, with the hop between
/// frames in seconds. T >= 1 and every entry is finite.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSequence {
    dim: usize,
    frame_shift: f64,
    data: Vec<f64>,
}

impl FeatureSequence {
    pub fn new(dim: usize, frame_shift: f64, data: Vec<f64>) -> Self {
        assert!(dim >= 1, "feature dimension must be >= 1");
        assert!(
            !data.is_empty() && data.len() % dim == 0,
            "data length {} not a positive multiple of dim {}",
            data.len(),
            dim
        );
        debug_assert!(data.iter().all(|v| v.is_finite()), "non-finite feature");
        FeatureSequence {
            dim,
            frame_shift,
            data,
        }
    }

    pub fn from_rows(rows: &[Vec<f64>], frame_shift: f64) -> Self {
        assert!(!rows.is_empty(), "need at least one frame");
        let dim = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in rows {
            assert_eq!(r.len(), dim, "ragged feature rows");
            data.extend_from_slice(r);
        }
        FeatureSequence::new(dim, frame_shift, data)
    }

    /// Number of frames T.
    pub fn t(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn frame_shift(&self) -> f64 {
        self.frame_shift
    }

    pub fn frame(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn frames(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}
