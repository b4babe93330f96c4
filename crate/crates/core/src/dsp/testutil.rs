//! Signal generators and spectral probes shared by unit tests.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::types::Waveform;

pub fn sine(freq: f64, sample_rate: u32, len: usize, amp: f64) -> Waveform {
    let samples = (0..len)
        .map(|n| amp * (2.0 * PI * freq * n as f64 / f64::from(sample_rate)).sin())
        .collect();
    Waveform::new(samples, sample_rate).unwrap()
}

/// Frequency of the largest DFT magnitude over the whole signal, refined by
/// parabolic interpolation of the log magnitude.
pub fn dominant_frequency(w: &Waveform) -> f64 {
    let n = w.len();
    let mut buf: Vec<Complex64> = w
        .samples()
        .iter()
        .map(|&x| Complex64::new(x, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let mags: Vec<f64> = buf[..n / 2 + 1].iter().map(|c| c.norm()).collect();
    let k = (1..mags.len() - 1)
        .max_by(|&a, &b| mags[a].total_cmp(&mags[b]))
        .unwrap();
    let (a, b, c) = (
        mags[k - 1].max(1e-300).ln(),
        mags[k].max(1e-300).ln(),
        mags[k + 1].max(1e-300).ln(),
    );
    let denom = a - 2.0 * b + c;
    let delta = if denom.abs() > 1e-12 {
        0.5 * (a - c) / denom
    } else {
        0.0
    };
    (k as f64 + delta) * f64::from(w.sample_rate()) / n as f64
}
