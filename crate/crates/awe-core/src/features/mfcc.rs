//! The MFCC pipeline and its framing/normalization helpers.

use rustfft::{num_complex::Complex, FftPlanner};

use super::{FeatError, FeatureSequence, Waveform};

/// Which value lands in coefficient slot 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FirstCoefficient {
    /// The DCT's own c0 (overall log-energy shape of the filterbank).
    C0,
    /// Floored log of the windowed frame's raw energy.
    LogEnergy,
}

#[derive(Clone, Debug)]
pub struct MfccConfig {
    /// Frame length in seconds.
    pub frame_length: f64,
    /// Hop between frame starts in seconds.
    pub frame_shift: f64,
    pub n_fft: usize,
    pub n_mels: usize,
    pub n_ceps: usize,
    /// Preemphasis coefficient in [0, 1).
    pub preemph: f64,
    /// Filterbank energies are clamped to at least this before the log.
    pub log_floor: f64,
    /// Apply per-utterance mean/variance normalization at the end.
    pub cmvn: bool,
    pub first_coefficient: FirstCoefficient,
}

impl Default for MfccConfig {
    fn default() -> Self {
        MfccConfig {
            frame_length: 0.025,
            frame_shift: 0.010,
            n_fft: 512,
            n_mels: 24,
            n_ceps: 13,
            preemph: 0.97,
            log_floor: 1e-10,
            cmvn: true,
            first_coefficient: FirstCoefficient::C0,
        }
    }
}

impl MfccConfig {
    pub fn frame_samples(&self, sample_rate: u32) -> usize {
        (self.frame_length * sample_rate as f64).round() as usize
    }

    pub fn shift_samples(&self, sample_rate: u32) -> usize {
        (self.frame_shift * sample_rate as f64).round() as usize
    }

    pub fn validate(&self, sample_rate: u32) -> Result<(), FeatError> {
        let bad = |msg: String| Err(FeatError::InvalidConfig(msg));
        if !(self.frame_shift > 0.0 && self.frame_shift <= self.frame_length) {
            return bad(format!(
                "frame_shift {} must be in (0, frame_length {}]",
                self.frame_shift, self.frame_length
            ));
        }
        let fs = self.frame_samples(sample_rate);
        if fs < 2 {
            return bad("frame_length shorter than two samples".into());
        }
        if self.n_fft < fs {
            return bad(format!("n_fft {} < frame samples {fs}", self.n_fft));
        }
        if self.n_mels == 0 || self.n_ceps == 0 || self.n_ceps > self.n_mels {
            return bad(format!(
                "need 1 <= n_ceps ({}) <= n_mels ({})",
                self.n_ceps, self.n_mels
            ));
        }
        if !(0.0..1.0).contains(&self.preemph) {
            return bad(format!("preemph {} outside [0, 1)", self.preemph));
        }
        if !(self.log_floor > 0.0) {
            return bad("log_floor must be positive".into());
        }
        Ok(())
    }
}

/// out[0] = w[0], out[n] = w[n] - alpha * w[n-1].
pub fn preemphasize(w: &Waveform, alpha: f64) -> Waveform {
    let s = w.samples();
    let mut out = Vec::with_capacity(s.len());
    out.push(s[0]);
    for n in 1..s.len() {
        out.push(s[n] - alpha * s[n - 1]);
    }
    Waveform::new(out, w.sample_rate()).expect("same length and rate as input")
}

/// Split into Hamming-windowed frames. Frame count is
/// 1 + floor((len - frame_samples) / shift_samples).
pub fn frame_signal(w: &Waveform, cfg: &MfccConfig) -> Result<Vec<Vec<f64>>, FeatError> {
    cfg.validate(w.sample_rate())?;
    let fs = cfg.frame_samples(w.sample_rate());
    let shift = cfg.shift_samples(w.sample_rate());
    let s = w.samples();
    if s.len() < fs {
        return Err(FeatError::SignalTooShort {
            needed: fs,
            got: s.len(),
        });
    }
    let window = hamming(fs);
    let n_frames = 1 + (s.len() - fs) / shift;
    let mut frames = Vec::with_capacity(n_frames);
    for f in 0..n_frames {
        let start = f * shift;
        let frame: Vec<f64> = s[start..start + fs]
            .iter()
            .zip(&window)
            .map(|(x, w)| x * w)
            .collect();
        frames.push(frame);
    }
    Ok(frames)
}

fn hamming(n: usize) -> Vec<f64> {
    let denom = (n - 1) as f64;
    (0..n)
        .map(|i| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * i as f64 / denom).cos())
        .collect()
}

fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters on a mel-spaced grid from 0 Hz to Nyquist, evaluated at
/// the DFT bin frequencies. Row j holds filter j's weight per bin.
fn mel_filterbank(sample_rate: u32, n_fft: usize, n_mels: usize) -> Vec<Vec<f64>> {
    let nyquist = sample_rate as f64 / 2.0;
    let n_bins = n_fft / 2 + 1;
    let mel_hi = hz_to_mel(nyquist);
    let edges: Vec<f64> = (0..n_mels + 2)
        .map(|p| mel_to_hz(mel_hi * p as f64 / (n_mels + 1) as f64))
        .collect();
    let bin_hz: Vec<f64> = (0..n_bins)
        .map(|k| k as f64 * sample_rate as f64 / n_fft as f64)
        .collect();
    (0..n_mels)
        .map(|j| {
            let (lo, mid, hi) = (edges[j], edges[j + 1], edges[j + 2]);
            bin_hz
                .iter()
                .map(|&f| {
                    if f >= lo && f <= mid {
                        (f - lo) / (mid - lo)
                    } else if f > mid && f <= hi {
                        (hi - f) / (hi - mid)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

/// Orthonormal type-II DCT of `x`, keeping the first `n_ceps` coefficients.
fn dct2_orthonormal(x: &[f64], n_ceps: usize) -> Vec<f64> {
    let j_count = x.len() as f64;
    (0..n_ceps)
        .map(|i| {
            let sum: f64 = x
                .iter()
                .enumerate()
                .map(|(j, &v)| {
                    v * (std::f64::consts::PI * (j as f64 + 0.5) * i as f64 / j_count).cos()
                })
                .sum();
            let scale = if i == 0 {
                (1.0 / j_count).sqrt()
            } else {
                (2.0 / j_count).sqrt()
            };
            scale * sum
        })
        .collect()
}

/// Full MFCC front end. Output dimension is `cfg.n_ceps` (13 by default).
pub fn mfcc(w: &Waveform, cfg: &MfccConfig) -> Result<FeatureSequence, FeatError> {
    cfg.validate(w.sample_rate())?;
    let pre = preemphasize(w, cfg.preemph);
    let frames = frame_signal(&pre, cfg)?;
    let filters = mel_filterbank(w.sample_rate(), cfg.n_fft, cfg.n_mels);
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(cfg.n_fft);
    let n_bins = cfg.n_fft / 2 + 1;

    let mut rows = Vec::with_capacity(frames.len());
    for frame in &frames {
        let mut buf: Vec<Complex<f64>> = frame.iter().map(|&v| Complex::new(v, 0.0)).collect();
        buf.resize(cfg.n_fft, Complex::new(0.0, 0.0));
        fft.process(&mut buf);
        let power: Vec<f64> = buf[..n_bins].iter().map(|c| c.norm_sqr()).collect();
        let log_energies: Vec<f64> = filters
            .iter()
            .map(|f| {
                let e: f64 = f.iter().zip(&power).map(|(w, p)| w * p).sum();
                e.max(cfg.log_floor).ln()
            })
            .collect();
        let mut ceps = dct2_orthonormal(&log_energies, cfg.n_ceps);
        if cfg.first_coefficient == FirstCoefficient::LogEnergy {
            let energy: f64 = frame.iter().map(|v| v * v).sum();
            ceps[0] = energy.max(cfg.log_floor).ln();
        }
        rows.push(ceps);
    }
    let feats = FeatureSequence::from_rows(&rows, cfg.frame_shift);
    Ok(if cfg.cmvn { cmvn(&feats) } else { feats })
}

/// Per-utterance, per-coefficient zero mean and unit variance. Variance is
/// floored at 1e-8 before division, so constant columns map to zero.
pub fn cmvn(f: &FeatureSequence) -> FeatureSequence {
    let (t, d) = (f.t(), f.dim());
    let tf = t as f64;
    let mut mean = vec![0.0; d];
    for frame in f.frames() {
        for (m, &v) in mean.iter_mut().zip(frame) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= tf;
    }
    let mut var = vec![0.0; d];
    for frame in f.frames() {
        for ((v, &x), &m) in var.iter_mut().zip(frame).zip(&mean) {
            let c = x - m;
            *v += c * c;
        }
    }
    let inv_std: Vec<f64> = var
        .iter()
        .map(|&v| 1.0 / (v / tf).max(1e-8).sqrt())
        .collect();
    let mut data = Vec::with_capacity(t * d);
    for frame in f.frames() {
        for ((&x, &m), &s) in frame.iter().zip(&mean).zip(&inv_std) {
            data.push((x - m) * s);
        }
    }
    FeatureSequence::new(d, f.frame_shift(), data)
}

/// Frames [start, end) of `f`.
pub fn slice_segment(
    f: &FeatureSequence,
    start: usize,
    end: usize,
) -> Result<FeatureSequence, FeatError> {
    if start >= end || end > f.t() {
        return Err(FeatError::OutOfRange {
            start,
            end,
            t: f.t(),
        });
    }
    let d = f.dim();
    let data = f.data()[start * d..end * d].to_vec();
    Ok(FeatureSequence::new(d, f.frame_shift(), data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn wave(samples: Vec<f64>) -> Waveform {
        Waveform::new(samples, 16000).unwrap()
    }

    #[test]
    fn preemphasis_hand_case() {
        let out = preemphasize(&wave(vec![1.0, 1.0, 1.0]), 0.97);
        let s = out.samples();
        assert_eq!(s[0], 1.0);
        assert!((s[1] - 0.03).abs() < 1e-15);
        assert!((s[2] - 0.03).abs() < 1e-15);
    }

    #[test]
    fn preemphasis_alpha_zero_is_identity() {
        let w = wave(vec![0.1, -0.2, 0.5]);
        assert_eq!(preemphasize(&w, 0.0).samples(), w.samples());
    }

    #[test]
    fn preemphasis_single_sample_unchanged() {
        assert_eq!(preemphasize(&wave(vec![0.7]), 0.97).samples(), &[0.7]);
    }

    #[test]
    fn frame_counts_match_formula() {
        let cfg = MfccConfig::default(); // 400 / 160 samples at 16 kHz
        assert_eq!(frame_signal(&wave(vec![0.1; 400]), &cfg).unwrap().len(), 1);
        assert_eq!(frame_signal(&wave(vec![0.1; 720]), &cfg).unwrap().len(), 3);
        assert!(matches!(
            frame_signal(&wave(vec![0.1; 399]), &cfg),
            Err(FeatError::SignalTooShort { needed: 400, got: 399 })
        ));
    }

    #[test]
    fn mfcc_dimension_is_13_and_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let samples: Vec<f64> = (0..1600).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let w = wave(samples);
        let cfg = MfccConfig::default();
        let a = mfcc(&w, &cfg).unwrap();
        let b = mfcc(&w, &cfg).unwrap();
        assert_eq!(a.dim(), 13);
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn zero_signal_gives_identical_frames() {
        let cfg = MfccConfig {
            cmvn: false,
            ..MfccConfig::default()
        };
        let f = mfcc(&wave(vec![0.0; 1600]), &cfg).unwrap();
        let first = f.frame(0).to_vec();
        for frame in f.frames() {
            assert_eq!(frame, first.as_slice());
        }
    }

    #[test]
    fn log_energy_variant_changes_only_first_column() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let samples: Vec<f64> = (0..1600).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let w = wave(samples);
        let base = MfccConfig {
            cmvn: false,
            ..MfccConfig::default()
        };
        let alt = MfccConfig {
            first_coefficient: FirstCoefficient::LogEnergy,
            ..base.clone()
        };
        let a = mfcc(&w, &base).unwrap();
        let b = mfcc(&w, &alt).unwrap();
        for (fa, fb) in a.frames().zip(b.frames()) {
            assert_ne!(fa[0], fb[0]);
            assert_eq!(&fa[1..], &fb[1..]);
        }
    }

    #[test]
    fn cmvn_normalizes_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|_| (0..4).map(|_| rng.gen_range(-5.0..5.0)).collect())
            .collect();
        let f = cmvn(&FeatureSequence::from_rows(&rows, 0.01));
        for d in 0..4 {
            let col: Vec<f64> = f.frames().map(|fr| fr[d]).collect();
            let mean: f64 = col.iter().sum::<f64>() / col.len() as f64;
            let var: f64 = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                / col.len() as f64;
            assert!(mean.abs() < 1e-10);
            assert!((var - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn cmvn_constant_column_maps_to_zero() {
        let rows = vec![vec![2.5, 1.0], vec![2.5, 2.0], vec![2.5, 3.0]];
        let f = cmvn(&FeatureSequence::from_rows(&rows, 0.01));
        for frame in f.frames() {
            assert_eq!(frame[0], 0.0);
        }
    }

    #[test]
    fn cmvn_single_frame_is_zero() {
        let f = cmvn(&FeatureSequence::from_rows(&[vec![3.0, -1.0]], 0.01));
        assert_eq!(f.frame(0), &[0.0, 0.0]);
    }

    #[test]
    fn cmvn_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|_| (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let once = cmvn(&FeatureSequence::from_rows(&rows, 0.01));
        let twice = cmvn(&once);
        for (a, b) in once.data().iter().zip(twice.data()) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn slice_bounds_and_composition() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, -(i as f64)]).collect();
        let f = FeatureSequence::from_rows(&rows, 0.01);
        assert_eq!(slice_segment(&f, 0, 10).unwrap(), f);
        let mid = slice_segment(&f, 2, 5).unwrap();
        assert_eq!(mid.t(), 3);
        assert_eq!(mid.frame(0), &[2.0, -2.0]);
        assert!(slice_segment(&f, 3, 11).is_err());
        assert!(slice_segment(&f, 4, 4).is_err());
        // slice(slice(f, a, b), c, d) = slice(f, a+c, a+d)
        let outer = slice_segment(&f, 1, 8).unwrap();
        let inner = slice_segment(&outer, 2, 5).unwrap();
        assert_eq!(inner, slice_segment(&f, 3, 6).unwrap());
    }

    #[test]
    fn filterbank_covers_band_without_gaps() {
        let fb = mel_filterbank(16000, 512, 24);
        assert_eq!(fb.len(), 24);
        // Every interior bin should be covered by at least one filter.
        let n_bins = 512 / 2 + 1;
        for k in 1..n_bins - 1 {
            let total: f64 = fb.iter().map(|f| f[k]).sum();
            assert!(total > 0.0, "bin {k} uncovered");
        }
    }

    #[test]
    fn dct_of_constant_has_single_nonzero() {
        let c = dct2_orthonormal(&[2.0; 8], 8);
        assert!((c[0] - 2.0 * 8f64.sqrt()).abs() < 1e-12);
        for &v in &c[1..] {
            assert!(v.abs() < 1e-12);
        }
    }
}
