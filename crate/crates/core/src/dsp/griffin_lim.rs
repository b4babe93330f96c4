//! Waveform reconstruction from log-mel features: non-negative least-squares
//! inversion of the filterbank followed by Griffin-Lim phase estimation.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::mel::{AnalysisConfig, MelFilterbank};
use super::types::{FeatureKind, FeatureMatrix, Waveform};
use crate::error::{Error, Result};

pub const DEFAULT_ITERATIONS: usize = 60;
const NNLS_ITERATIONS: usize = 50;
const PHASE_SEED: u64 = 0x6772_6966_6669_6e6c;

/// Reconstructs a waveform of `T * hop` samples from log-mel features.
pub fn griffin_lim(
    mel: &FeatureMatrix,
    config: &AnalysisConfig,
    iterations: usize,
) -> Result<Waveform> {
    griffin_lim_traced(mel, config, iterations).map(|(w, _)| w)
}

/// Like [`griffin_lim`], also returning the spectral convergence
/// `‖|STFT(x_i)| - S‖ / ‖S‖` measured after every iteration.
pub fn griffin_lim_traced(
    mel: &FeatureMatrix,
    config: &AnalysisConfig,
    iterations: usize,
) -> Result<(Waveform, Vec<f64>)> {
    if iterations == 0 {
        return Err(Error::invalid("griffin-lim needs at least one iteration"));
    }
    if mel.kind() == FeatureKind::MelCepstrum {
        return Err(Error::invalid("griffin-lim expects log-mel features"));
    }
    let bank = config.filterbank()?;
    if mel.dim() != bank.n_mels() {
        return Err(Error::DimensionMismatch {
            expected: bank.n_mels(),
            actual: mel.dim(),
        });
    }
    let n_frames = mel.n_frames();
    let out_len = n_frames * config.hop;
    if n_frames == 0 {
        return Ok((Waveform::new(Vec::new(), config.sample_rate)?, Vec::new()));
    }

    let inverse = MelInverse::new(&bank);
    let magnitudes: Vec<f64> = mel
        .rows()
        .flat_map(|row| {
            let power: Vec<f64> = row.iter().map(|v| v.exp()).collect();
            inverse.solve(&power).into_iter().map(f64::sqrt)
        })
        .collect();

    let mut engine = PhaseEngine::new(
        config.frame_len,
        config.hop,
        config.window.coefficients(config.frame_len),
        n_frames,
    );
    let n_bins = config.frame_len / 2 + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(PHASE_SEED);
    let mut spectrum: Vec<Complex64> = magnitudes
        .iter()
        .map(|&m| Complex64::from_polar(m, rng.gen_range(0.0..2.0 * PI)))
        .collect();
    // DC and Nyquist bins of a real signal are real
    for t in 0..n_frames {
        spectrum[t * n_bins] = Complex64::new(magnitudes[t * n_bins], 0.0);
        let last = t * n_bins + n_bins - 1;
        spectrum[last] = Complex64::new(magnitudes[last], 0.0);
    }
    let target_norm = weighted_norm(&magnitudes, n_bins).max(f64::MIN_POSITIVE);

    let mut trace = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let signal = engine.synthesize(&spectrum);
        let rebuilt = engine.analyze(&signal);
        let diff: Vec<f64> = rebuilt
            .iter()
            .zip(&magnitudes)
            .map(|(c, m)| c.norm() - m)
            .collect();
        trace.push(weighted_norm(&diff, n_bins) / target_norm);
        for ((slot, c), &m) in spectrum.iter_mut().zip(&rebuilt).zip(&magnitudes) {
            let norm = c.norm();
            *slot = if norm > 0.0 {
                c * (m / norm)
            } else {
                Complex64::new(m, 0.0)
            };
        }
    }
    let signal = engine.synthesize(&spectrum);

    let offset = config.frame_len / 2;
    let samples: Vec<f64> = (0..out_len)
        .map(|i| signal.get(offset + i).copied().unwrap_or(0.0))
        .collect();
    Ok((Waveform::new(samples, config.sample_rate)?, trace))
}

/// Norm of a half spectrum counted as the full Hermitian spectrum.
fn weighted_norm(values: &[f64], n_bins: usize) -> f64 {
    values
        .chunks_exact(n_bins)
        .flat_map(|row| {
            row.iter().enumerate().map(move |(k, v)| {
                let w = if k == 0 || k == n_bins - 1 { 1.0 } else { 2.0 };
                w * v * v
            })
        })
        .sum::<f64>()
        .sqrt()
}

/// Projected-gradient non-negative least squares for `min ‖M x - y‖, x ≥ 0`.
struct MelInverse<'a> {
    bank: &'a MelFilterbank,
    step: f64,
    row_sums: Vec<f64>,
    column_sums: Vec<f64>,
}

impl<'a> MelInverse<'a> {
    fn new(bank: &'a MelFilterbank) -> Self {
        let (n_mels, n_bins) = (bank.n_mels(), bank.n_bins());
        // largest eigenvalue of M Mᵀ by power iteration
        let gram: Vec<f64> = (0..n_mels)
            .flat_map(|a| {
                (0..n_mels).map(move |b| {
                    bank.row(a)
                        .iter()
                        .zip(bank.row(b))
                        .map(|(x, y)| x * y)
                        .sum()
                })
            })
            .collect();
        let mut v = vec![1.0; n_mels];
        let mut lambda = 1.0;
        for _ in 0..100 {
            let next: Vec<f64> = (0..n_mels)
                .map(|a| (0..n_mels).map(|b| gram[a * n_mels + b] * v[b]).sum())
                .collect();
            lambda = next.iter().map(|x| x * x).sum::<f64>().sqrt();
            v = next.iter().map(|x| x / lambda).collect();
        }
        let row_sums = (0..n_mels).map(|m| bank.row(m).iter().sum()).collect();
        let column_sums = (0..n_bins)
            .map(|k| (0..n_mels).map(|m| bank.row(m)[k]).sum())
            .collect();
        Self {
            bank,
            step: 1.0 / lambda,
            row_sums,
            column_sums,
        }
    }

    fn solve(&self, target: &[f64]) -> Vec<f64> {
        let (n_mels, n_bins) = (self.bank.n_mels(), self.bank.n_bins());
        // start from the per-band mean power spread back over each filter
        let density: Vec<f64> = target
            .iter()
            .zip(&self.row_sums)
            .map(|(y, s)| y / s)
            .collect();
        let mut x: Vec<f64> = (0..n_bins)
            .map(|k| {
                if self.column_sums[k] > 0.0 {
                    (0..n_mels)
                        .map(|m| self.bank.row(m)[k] * density[m])
                        .sum::<f64>()
                        / self.column_sums[k]
                } else {
                    0.0
                }
            })
            .collect();
        let mut residual = vec![0.0; n_mels];
        for _ in 0..NNLS_ITERATIONS {
            for (m, r) in residual.iter_mut().enumerate() {
                *r = self
                    .bank
                    .row(m)
                    .iter()
                    .zip(&x)
                    .map(|(w, v)| w * v)
                    .sum::<f64>()
                    - target[m];
            }
            for (k, v) in x.iter_mut().enumerate() {
                let grad: f64 = (0..n_mels).map(|m| self.bank.row(m)[k] * residual[m]).sum();
                *v = (*v - self.step * grad).max(0.0);
            }
        }
        x
    }
}

/// Overlap-add synthesis and analysis on the unpadded frame grid, so that
/// analysis after synthesis is an orthogonal projection onto consistent
/// spectrograms.
struct PhaseEngine {
    frame_len: usize,
    hop: usize,
    window: Vec<f64>,
    n_frames: usize,
    norm: Vec<f64>,
    forward: std::sync::Arc<dyn rustfft::Fft<f64>>,
    backward: std::sync::Arc<dyn rustfft::Fft<f64>>,
    buf: Vec<Complex64>,
}

impl PhaseEngine {
    fn new(frame_len: usize, hop: usize, window: Vec<f64>, n_frames: usize) -> Self {
        let len = (n_frames - 1) * hop + frame_len;
        let mut norm = vec![0.0; len];
        for t in 0..n_frames {
            for (j, w) in window.iter().enumerate() {
                norm[t * hop + j] += w * w;
            }
        }
        let mut planner = FftPlanner::new();
        Self {
            frame_len,
            hop,
            window,
            n_frames,
            norm,
            forward: planner.plan_fft_forward(frame_len),
            backward: planner.plan_fft_inverse(frame_len),
            buf: vec![Complex64::default(); frame_len],
        }
    }

    fn synthesize(&mut self, spectrum: &[Complex64]) -> Vec<f64> {
        let n_bins = self.frame_len / 2 + 1;
        let mut out = vec![0.0; self.norm.len()];
        for t in 0..self.n_frames {
            let half = &spectrum[t * n_bins..(t + 1) * n_bins];
            self.buf[..n_bins].copy_from_slice(half);
            for k in n_bins..self.frame_len {
                self.buf[k] = half[self.frame_len - k].conj();
            }
            self.buf[0].im = 0.0;
            if self.frame_len.is_multiple_of(2) {
                self.buf[n_bins - 1].im = 0.0;
            }
            self.backward.process(&mut self.buf);
            let scale = 1.0 / self.frame_len as f64;
            for (j, (c, w)) in self.buf.iter().zip(&self.window).enumerate() {
                out[t * self.hop + j] += w * c.re * scale;
            }
        }
        for (x, n) in out.iter_mut().zip(&self.norm) {
            if *n > 1e-12 {
                *x /= n;
            } else {
                *x = 0.0;
            }
        }
        out
    }

    fn analyze(&mut self, signal: &[f64]) -> Vec<Complex64> {
        let n_bins = self.frame_len / 2 + 1;
        let mut out = Vec::with_capacity(self.n_frames * n_bins);
        for t in 0..self.n_frames {
            for (j, slot) in self.buf.iter_mut().enumerate() {
                *slot = Complex64::new(signal[t * self.hop + j] * self.window[j], 0.0);
            }
            self.forward.process(&mut self.buf);
            out.extend_from_slice(&self.buf[..n_bins]);
        }
        out
    }
}
