use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::types::Waveform;
use crate::error::{Error, Result};
use crate::rate::Rate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum WindowKind {
    #[default]
    Hann,
    Rectangular,
}

impl WindowKind {
    /// Periodic window of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            WindowKind::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
                .collect(),
            WindowKind::Rectangular => vec![1.0; n],
        }
    }
}

/// Complex short-time spectrum, `n_frames × n_bins`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub(crate) bins: Vec<Complex64>,
    pub(crate) n_frames: usize,
    pub(crate) frame_len: usize,
    pub(crate) hop: usize,
    pub(crate) sample_rate: u32,
}

impl Spectrogram {
    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn n_bins(&self) -> usize {
        self.frame_len / 2 + 1
    }

    pub fn frame_len(&self) -> usize {
        self.frame_len
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn frame_rate(&self) -> Rate {
        Rate::from_hop(self.sample_rate, self.hop).expect("hop validated at construction")
    }

    pub fn frame(&self, t: usize) -> &[Complex64] {
        let nb = self.n_bins();
        &self.bins[t * nb..(t + 1) * nb]
    }

    /// Squared magnitudes, row-major.
    pub fn power(&self) -> Vec<f64> {
        self.bins.iter().map(|c| c.norm_sqr()).collect()
    }

    pub fn bin_frequency(&self, k: usize) -> f64 {
        k as f64 * f64::from(self.sample_rate) / self.frame_len as f64
    }
}

/// Index into a signal of length `n` reflected about its end samples
/// (no edge repetition), repeating as often as needed.
pub(crate) fn reflect_index(i: i64, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as i64 - 1);
    let mut m = i.rem_euclid(period);
    if m >= n as i64 {
        m = period - m;
    }
    m as usize
}

/// Centred short-time Fourier transform with reflect padding.
///
/// Frame `t` is centred on sample `t * hop`, giving `ceil(len / hop)` frames
/// of `frame_len / 2 + 1` bins each.
pub fn stft(w: &Waveform, frame_len: usize, hop: usize, window: WindowKind) -> Result<Spectrogram> {
    if hop == 0 {
        return Err(Error::invalid("hop must be positive"));
    }
    if frame_len < 2 || hop > frame_len {
        return Err(Error::invalid(format!(
            "need 0 < hop <= frame_len and frame_len >= 2, got hop {hop}, frame_len {frame_len}"
        )));
    }
    let samples = w.samples();
    let n = samples.len();
    let n_frames = n.div_ceil(hop);
    let n_bins = frame_len / 2 + 1;
    let win = window.coefficients(frame_len);
    let fft = FftPlanner::new().plan_fft_forward(frame_len);
    let mut buf = vec![Complex64::default(); frame_len];
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    let mut bins = Vec::with_capacity(n_frames * n_bins);
    let pad = (frame_len / 2) as i64;
    for t in 0..n_frames {
        let start = (t * hop) as i64 - pad;
        for (j, slot) in buf.iter_mut().enumerate() {
            let x = samples[reflect_index(start + j as i64, n)];
            *slot = Complex64::new(x * win[j], 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        bins.extend_from_slice(&buf[..n_bins]);
    }
    Ok(Spectrogram {
        bins,
        n_frames,
        frame_len,
        hop,
        sample_rate: w.sample_rate(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::testutil::sine;
    use proptest::prelude::*;

    #[test]
    fn zero_signal_gives_zero_matrix() {
        let w = Waveform::silence(5000, 16000).unwrap();
        let s = stft(&w, 512, 128, WindowKind::Hann).unwrap();
        assert!(s.bins.iter().all(|c| c.norm() == 0.0));
        assert_eq!(s.n_frames(), 40);
    }

    #[test]
    fn hop_480_frame_rates() {
        let w16 = Waveform::silence(16000, 16000).unwrap();
        let w24 = Waveform::silence(24000, 24000).unwrap();
        let s16 = stft(&w16, 2048, 480, WindowKind::Hann).unwrap();
        let s24 = stft(&w24, 2048, 480, WindowKind::Hann).unwrap();
        assert_eq!(s16.frame_rate(), Rate::new(100, 3).unwrap());
        assert_eq!(s24.frame_rate(), Rate::hz(50));
        assert_eq!(s16.n_bins(), 1025);
    }

    #[test]
    fn bin_centred_tone_concentrates_in_one_bin() {
        // bin 32 of a 256-point frame at 8 kHz is exactly 1000 Hz
        let w = sine(1000.0, 8000, 4096, 1.0);
        let s = stft(&w, 256, 64, WindowKind::Rectangular).unwrap();
        // interior frames only: edge frames see the reflected signal
        for t in 4..s.n_frames() - 4 {
            let frame = s.frame(t);
            let total: f64 = frame.iter().map(|c| c.norm_sqr()).sum();
            assert!(frame[32].norm_sqr() / total > 0.999_999, "frame {t}");
        }
    }

    #[test]
    fn invalid_hops_rejected() {
        let w = Waveform::silence(100, 16000).unwrap();
        assert!(stft(&w, 64, 0, WindowKind::Hann).is_err());
        assert!(stft(&w, 64, 65, WindowKind::Hann).is_err());
    }

    #[test]
    fn reflect_index_mirrors_without_repeating_edges() {
        let idx: Vec<usize> = (-3..7).map(|i| reflect_index(i, 4)).collect();
        assert_eq!(idx, vec![3, 2, 1, 0, 1, 2, 3, 2, 1, 0]);
    }

    proptest! {
        #[test]
        fn frame_count_is_ceil_len_over_hop(len in 1usize..3000, hop in 1usize..256) {
            let w = Waveform::silence(len, 16000).unwrap();
            let s = stft(&w, 256, hop, WindowKind::Hann).unwrap();
            prop_assert_eq!(s.n_frames(), len.div_ceil(hop));
        }
    }
}
