//! YIN fundamental-frequency estimation.

use serde::{Deserialize, Serialize};

use super::types::{F0Track, Waveform};
use crate::error::{Error, Result};
use crate::rate::Rate;

pub const DEFAULT_YIN_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F0Config {
    pub f0_floor: f64,
    pub f0_ceil: f64,
    pub hop: usize,
    pub threshold: f64,
}

impl Default for F0Config {
    fn default() -> Self {
        Self {
            f0_floor: 60.0,
            f0_ceil: 500.0,
            hop: 480,
            threshold: DEFAULT_YIN_THRESHOLD,
        }
    }
}

/// Estimates F0 with the default YIN threshold; see [`estimate_f0_with`].
pub fn estimate_f0(w: &Waveform, f0_floor: f64, f0_ceil: f64, hop: usize) -> Result<F0Track> {
    estimate_f0_with(
        w,
        &F0Config {
            f0_floor,
            f0_ceil,
            hop,
            threshold: DEFAULT_YIN_THRESHOLD,
        },
    )
}

/// One estimate per `hop` samples, frame `t` centred on sample `t * hop`, so
/// the track lines up with [`stft`](super::stft::stft) frames.
pub fn estimate_f0_with(w: &Waveform, config: &F0Config) -> Result<F0Track> {
    let sr = f64::from(w.sample_rate());
    let F0Config {
        f0_floor,
        f0_ceil,
        hop,
        threshold,
    } = *config;
    if hop == 0 {
        return Err(Error::invalid("hop must be positive"));
    }
    if !(f0_floor > 0.0 && f0_floor < f0_ceil && f0_ceil < sr / 2.0) {
        return Err(Error::invalid(format!(
            "need 0 < f0_floor < f0_ceil < {} Hz, got {f0_floor}..{f0_ceil}",
            sr / 2.0
        )));
    }
    let tau_min = ((sr / f0_ceil).floor() as usize).max(2);
    let tau_max = (sr / f0_floor).ceil() as usize + 1;
    let window = tau_max;
    let span = window + tau_max;

    let x = w.samples();
    let n_frames = x.len().div_ceil(hop);
    let mut frame = vec![0.0; span];
    let mut diff = vec![0.0; tau_max + 1];
    let mut cmnd = vec![1.0; tau_max + 1];
    let mut values = Vec::with_capacity(n_frames);
    for t in 0..n_frames {
        let start = (t * hop) as i64 - (span / 2) as i64;
        for (j, slot) in frame.iter_mut().enumerate() {
            let i = start + j as i64;
            *slot = if i >= 0 && (i as usize) < x.len() {
                x[i as usize]
            } else {
                0.0
            };
        }
        for (tau, d) in diff.iter_mut().enumerate() {
            *d = (0..window)
                .map(|j| {
                    let e = frame[j] - frame[j + tau];
                    e * e
                })
                .sum();
        }
        let mut running = 0.0;
        for tau in 1..=tau_max {
            running += diff[tau];
            cmnd[tau] = if running > 0.0 {
                diff[tau] * tau as f64 / running
            } else {
                1.0
            };
        }
        values.push(
            pick_period(&cmnd, tau_min, tau_max, threshold).map_or(0.0, |period| {
                let f = sr / period;
                if f >= f0_floor && f <= f0_ceil {
                    f
                } else {
                    0.0
                }
            }),
        );
    }
    F0Track::new(values, Rate::from_hop(w.sample_rate(), hop)?)
}

/// First dip below `threshold`, followed down to its local minimum and refined
/// by a parabola through the neighbouring lags.
fn pick_period(cmnd: &[f64], tau_min: usize, tau_max: usize, threshold: f64) -> Option<f64> {
    let mut tau = (tau_min..tau_max).find(|&tau| cmnd[tau] < threshold)?;
    while tau + 1 < tau_max && cmnd[tau + 1] < cmnd[tau] {
        tau += 1;
    }
    let (a, b, c) = (cmnd[tau - 1], cmnd[tau], cmnd[tau + 1]);
    let denom = a - 2.0 * b + c;
    let shift = if denom.abs() > 1e-12 {
        (0.5 * (a - c) / denom).clamp(-1.0, 1.0)
    } else {
        0.0
    };
    Some(tau as f64 + shift)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::testutil::sine;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn silence_is_unvoiced() {
        let w = Waveform::silence(16000, 16000).unwrap();
        let f0 = estimate_f0(&w, 60.0, 500.0, 480).unwrap();
        assert_eq!(f0.len(), 34);
        assert!(f0.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sine_220_is_tracked() {
        let w = sine(220.0, 16000, 16000, 0.5);
        let f0 = estimate_f0(&w, 60.0, 500.0, 480).unwrap();
        let n = f0.len();
        for (t, &v) in f0.values().iter().enumerate().take(n - 2).skip(2) {
            assert!((v - 220.0).abs() <= 1.0, "frame {t}: {v}");
        }
    }

    #[test]
    fn white_noise_mostly_unvoiced() {
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        let samples = (0..32000).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let w = Waveform::new(samples, 16000).unwrap();
        let f0 = estimate_f0(&w, 60.0, 500.0, 480).unwrap();
        assert!(
            1.0 - f0.voiced_fraction() >= 0.9,
            "voiced {}",
            f0.voiced_fraction()
        );
    }

    #[test]
    fn sweep_error_below_one_percent() {
        // linear chirp 80 Hz -> 400 Hz over 4 s
        let (sr, secs, f_start, f_end) = (16000u32, 4.0, 80.0, 400.0);
        let n = (f64::from(sr) * secs) as usize;
        let rate = (f_end - f_start) / secs;
        let samples = (0..n)
            .map(|i| {
                let t = i as f64 / f64::from(sr);
                0.5 * (2.0 * PI * (f_start * t + 0.5 * rate * t * t)).sin()
            })
            .collect();
        let w = Waveform::new(samples, sr).unwrap();
        let f0 = estimate_f0(&w, 60.0, 500.0, 160).unwrap();
        let mut voiced = 0;
        for (i, &v) in f0.values().iter().enumerate() {
            let t = (i * 160) as f64 / f64::from(sr);
            if v > 0.0 && t > 0.1 && t < secs - 0.1 {
                voiced += 1;
                let truth = f_start + rate * t;
                assert!((v - truth).abs() / truth < 0.01, "t={t}: {v} vs {truth}");
            }
        }
        assert!(voiced > 300);
    }

    #[test]
    fn invalid_bounds_rejected() {
        let w = Waveform::silence(100, 16000).unwrap();
        assert!(estimate_f0(&w, 500.0, 60.0, 480).is_err());
        assert!(estimate_f0(&w, 60.0, 8000.0, 480).is_err());
        assert!(estimate_f0(&w, 60.0, 500.0, 0).is_err());
    }
}
