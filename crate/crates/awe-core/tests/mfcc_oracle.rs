//! Checks the FFT-based MFCC pipeline against a from-scratch reference that
//! computes everything directly from the defining formulas: O(N^2) DFT,
//! filterbank built bin by bin, naive DCT, naive normalization. The reference
//! shares no code with the library.

use awe_core::features::{mfcc, FeatureSequence, MfccConfig, Waveform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PI: f64 = std::f64::consts::PI;

/// Reference pipeline, every stage written out longhand.
fn reference_mfcc(samples: &[f64], sample_rate: u32, cfg: &MfccConfig) -> Vec<Vec<f64>> {
    // Preemphasis.
    let mut pre = vec![samples[0]];
    for n in 1..samples.len() {
        pre.push(samples[n] - cfg.preemph * samples[n - 1]);
    }

    // Framing with a Hamming window.
    let frame_len = (cfg.frame_length * sample_rate as f64).round() as usize;
    let shift = (cfg.frame_shift * sample_rate as f64).round() as usize;
    assert!(pre.len() >= frame_len);
    let n_frames = 1 + (pre.len() - frame_len) / shift;
    let n_bins = cfg.n_fft / 2 + 1;

    // Mel filter weights per bin, from the 2595 * log10(1 + f/700) scale.
    let mel = |hz: f64| 2595.0 * (1.0 + hz / 700.0).log10();
    let unmel = |m: f64| 700.0 * (10f64.powf(m / 2595.0) - 1.0);
    let top_mel = mel(sample_rate as f64 / 2.0);
    let edge = |p: usize| unmel(top_mel * p as f64 / (cfg.n_mels + 1) as f64);

    let mut out = Vec::with_capacity(n_frames);
    for f in 0..n_frames {
        let mut frame: Vec<f64> = (0..frame_len)
            .map(|i| {
                let w = 0.54 - 0.46 * (2.0 * PI * i as f64 / (frame_len - 1) as f64).cos();
                pre[f * shift + i] * w
            })
            .collect();
        frame.resize(cfg.n_fft, 0.0);

        // Direct DFT, power spectrum on bins 0..=n_fft/2.
        let mut power = Vec::with_capacity(n_bins);
        for k in 0..n_bins {
            let mut re = 0.0;
            let mut im = 0.0;
            for (n, &x) in frame.iter().enumerate() {
                let ang = -2.0 * PI * (k * n) as f64 / cfg.n_fft as f64;
                re += x * ang.cos();
                im += x * ang.sin();
            }
            power.push(re * re + im * im);
        }

        // Filterbank energies and floored log.
        let mut log_e = Vec::with_capacity(cfg.n_mels);
        for j in 0..cfg.n_mels {
            let (lo, mid, hi) = (edge(j), edge(j + 1), edge(j + 2));
            let mut e = 0.0;
            for (k, &p) in power.iter().enumerate() {
                let hz = k as f64 * sample_rate as f64 / cfg.n_fft as f64;
                let w = if hz >= lo && hz <= mid {
                    (hz - lo) / (mid - lo)
                } else if hz > mid && hz <= hi {
                    (hi - hz) / (hi - mid)
                } else {
                    0.0
                };
                e += w * p;
            }
            log_e.push(e.max(cfg.log_floor).ln());
        }

        // Orthonormal DCT-II, first n_ceps coefficients.
        let mut ceps = Vec::with_capacity(cfg.n_ceps);
        for i in 0..cfg.n_ceps {
            let mut s = 0.0;
            for (j, &v) in log_e.iter().enumerate() {
                s += v * (PI * (j as f64 + 0.5) * i as f64 / cfg.n_mels as f64).cos();
            }
            let scale = if i == 0 {
                (1.0 / cfg.n_mels as f64).sqrt()
            } else {
                (2.0 / cfg.n_mels as f64).sqrt()
            };
            ceps.push(scale * s);
        }
        out.push(ceps);
    }

    if cfg.cmvn {
        let t = out.len() as f64;
        for d in 0..cfg.n_ceps {
            let mean: f64 = out.iter().map(|r| r[d]).sum::<f64>() / t;
            let var: f64 = out.iter().map(|r| (r[d] - mean) * (r[d] - mean)).sum::<f64>() / t;
            let inv = 1.0 / var.max(1e-8).sqrt();
            for r in &mut out {
                r[d] = (r[d] - mean) * inv;
            }
        }
    }
    out
}

fn assert_close(fast: &FeatureSequence, slow: &[Vec<f64>]) {
    assert_eq!(fast.t(), slow.len());
    assert_eq!(fast.dim(), 13);
    for (t, (a, b)) in fast.frames().zip(slow).enumerate() {
        for (d, (&x, &y)) in a.iter().zip(b).enumerate() {
            let tol = 1e-8 * x.abs().max(y.abs()).max(1.0);
            assert!(
                (x - y).abs() <= tol,
                "frame {t} coeff {d}: {x} vs {y}"
            );
        }
    }
}

#[test]
fn sine_matches_slow_reference() {
    let sr = 16000u32;
    let samples: Vec<f64> = (0..8000)
        .map(|n| 0.6 * (2.0 * PI * 440.0 * n as f64 / sr as f64).sin())
        .collect();
    let w = Waveform::new(samples.clone(), sr).unwrap();
    let cfg = MfccConfig::default();
    let fast = mfcc(&w, &cfg).unwrap();
    let slow = reference_mfcc(&samples, sr, &cfg);
    assert_close(&fast, &slow);
}

#[test]
fn random_signals_match_slow_reference() {
    let sr = 16000u32;
    let cfg = MfccConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for case in 0..20 {
        // Half a second of tone mixture plus noise.
        let n = 8000;
        let tones: Vec<(f64, f64, f64)> = (0..3)
            .map(|_| {
                (
                    rng.gen_range(80.0..6000.0),
                    rng.gen_range(0.05..0.4),
                    rng.gen_range(0.0..2.0 * PI),
                )
            })
            .collect();
        let samples: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 / sr as f64;
                let mut v = rng.gen_range(-0.05..0.05);
                for &(f, a, ph) in &tones {
                    v += a * (2.0 * PI * f * t + ph).sin();
                }
                v
            })
            .collect();
        let w = Waveform::new(samples.clone(), sr).unwrap();
        let fast = mfcc(&w, &cfg).unwrap();
        assert_eq!(fast.dim(), 13, "case {case}");
        let slow = reference_mfcc(&samples, sr, &cfg);
        assert_close(&fast, &slow);
    }
}

#[test]
fn reference_agreement_holds_without_cmvn_too() {
    let sr = 16000u32;
    let cfg = MfccConfig {
        cmvn: false,
        ..MfccConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let samples: Vec<f64> = (0..4800).map(|_| rng.gen_range(-0.3..0.3)).collect();
    let w = Waveform::new(samples.clone(), sr).unwrap();
    let fast = mfcc(&w, &cfg).unwrap();
    let slow = reference_mfcc(&samples, sr, &cfg);
    assert_close(&fast, &slow);
}
