//! Triangular mel filterbank and log-mel analysis.

use serde::{Deserialize, Serialize};

use super::stft::{stft, Spectrogram, WindowKind};
use super::types::{FeatureKind, FeatureMatrix, Waveform};
use crate::error::{Error, Result};

/// Power floor applied before the logarithm.
pub const POWER_FLOOR: f64 = 1e-10;

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Analysis front end shared by feature extraction, the codec and Griffin-Lim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub sample_rate: u32,
    pub frame_len: usize,
    pub hop: usize,
    pub n_mels: usize,
    pub fmin: f64,
    /// Upper band edge; `None` means Nyquist.
    pub fmax: Option<f64>,
    pub window: WindowKind,
}

impl AnalysisConfig {
    pub fn new(sample_rate: u32) -> Self {
        Self {
            sample_rate,
            frame_len: 2048,
            hop: 480,
            n_mels: 80,
            fmin: 0.0,
            fmax: None,
            window: WindowKind::Hann,
        }
    }

    pub fn fmax_hz(&self) -> f64 {
        self.fmax.unwrap_or(f64::from(self.sample_rate) / 2.0)
    }

    pub fn filterbank(&self) -> Result<MelFilterbank> {
        MelFilterbank::new(
            self.sample_rate,
            self.frame_len,
            self.n_mels,
            self.fmin,
            self.fmax_hz(),
        )
    }
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self::new(16000)
    }
}

/// `n_mels × n_bins` matrix of triangular filters with peak value 1.
///
/// Filter `m` rises from the centre of filter `m - 1` and falls to the centre
/// of filter `m + 1`, so neighbours overlap by half.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    weights: Vec<f64>,
    n_mels: usize,
    n_bins: usize,
    /// `n_mels + 2` band edges in Hz; `edges[m + 1]` is the centre of filter `m`.
    edges: Vec<f64>,
}

impl MelFilterbank {
    pub fn new(
        sample_rate: u32,
        frame_len: usize,
        n_mels: usize,
        fmin: f64,
        fmax: f64,
    ) -> Result<Self> {
        let nyquist = f64::from(sample_rate) / 2.0;
        if n_mels == 0 {
            return Err(Error::invalid("n_mels must be at least 1"));
        }
        if !(fmin >= 0.0 && fmin < fmax) {
            return Err(Error::invalid(format!(
                "need 0 <= fmin < fmax, got {fmin}..{fmax}"
            )));
        }
        if fmax > nyquist {
            return Err(Error::invalid(format!(
                "fmax {fmax} Hz exceeds Nyquist {nyquist} Hz"
            )));
        }
        let n_bins = frame_len / 2 + 1;
        let (mel_lo, mel_hi) = (hz_to_mel(fmin), hz_to_mel(fmax));
        let edges: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (n_mels + 1) as f64))
            .collect();
        let bin_hz = f64::from(sample_rate) / frame_len as f64;
        let mut weights = vec![0.0; n_mels * n_bins];
        for m in 0..n_mels {
            let (lo, centre, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            let row = &mut weights[m * n_bins..(m + 1) * n_bins];
            for (k, w) in row.iter_mut().enumerate() {
                let f = k as f64 * bin_hz;
                let rising = (f - lo) / (centre - lo);
                let falling = (hi - f) / (hi - centre);
                *w = rising.min(falling).max(0.0);
            }
            // a filter narrower than the bin spacing falls between bins
            if row.iter().all(|&w| w == 0.0) {
                let nearest = ((centre / bin_hz).round() as usize).min(n_bins - 1);
                row[nearest] = 1.0;
            }
        }
        Ok(Self {
            weights,
            n_mels,
            n_bins,
            edges,
        })
    }

    pub fn n_mels(&self) -> usize {
        self.n_mels
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn row(&self, m: usize) -> &[f64] {
        &self.weights[m * self.n_bins..(m + 1) * self.n_bins]
    }

    pub fn centers(&self) -> &[f64] {
        &self.edges[1..self.n_mels + 1]
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    /// Mel-band energies of one power spectrum frame.
    pub fn apply(&self, power: &[f64]) -> Vec<f64> {
        (0..self.n_mels)
            .map(|m| self.row(m).iter().zip(power).map(|(w, p)| w * p).sum())
            .collect()
    }
}

/// Log-compressed mel energies `ln(max(power, POWER_FLOOR))` of a spectrogram.
pub fn mel_spectrogram(
    spec: &Spectrogram,
    n_mels: usize,
    fmin: f64,
    fmax: f64,
) -> Result<FeatureMatrix> {
    let bank = MelFilterbank::new(spec.sample_rate(), spec.frame_len(), n_mels, fmin, fmax)?;
    log_mel_with(&bank, spec)
}

pub(crate) fn log_mel_with(bank: &MelFilterbank, spec: &Spectrogram) -> Result<FeatureMatrix> {
    let power = spec.power();
    let nb = spec.n_bins();
    let mut data = Vec::with_capacity(spec.n_frames() * bank.n_mels());
    for t in 0..spec.n_frames() {
        let energies = bank.apply(&power[t * nb..(t + 1) * nb]);
        data.extend(energies.into_iter().map(|e| e.max(POWER_FLOOR).ln()));
    }
    FeatureMatrix::new(
        data,
        spec.n_frames(),
        bank.n_mels(),
        spec.frame_rate(),
        FeatureKind::MelSpectrogram,
    )
}

/// Waveform to log-mel features under `config`.
pub fn log_mel(w: &Waveform, config: &AnalysisConfig) -> Result<FeatureMatrix> {
    if w.sample_rate() != config.sample_rate {
        return Err(Error::invalid(format!(
            "waveform is {} Hz but analysis expects {} Hz",
            w.sample_rate(),
            config.sample_rate
        )));
    }
    let spec = stft(w, config.frame_len, config.hop, config.window)?;
    log_mel_with(&config.filterbank()?, &spec)
}
