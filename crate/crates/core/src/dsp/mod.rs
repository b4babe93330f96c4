//! Signal-processing front end.

mod cepstrum;
mod f0;
mod griffin_lim;
mod mel;
mod resample;
mod stft;
mod types;
pub mod wav;

#[cfg(test)]
pub(crate) mod testutil;

pub use cepstrum::{inverse_mel_cepstrum, mel_cepstrum};
pub use f0::{estimate_f0, estimate_f0_with, F0Config, DEFAULT_YIN_THRESHOLD};
pub use griffin_lim::{griffin_lim, griffin_lim_traced, DEFAULT_ITERATIONS};
pub use mel::{
    hz_to_mel, log_mel, mel_spectrogram, mel_to_hz, AnalysisConfig, MelFilterbank, POWER_FLOOR,
};
pub use resample::resample;
pub use stft::{stft, Spectrogram, WindowKind};
pub(crate) use types::check_finite;
pub use types::{F0Track, FeatureKind, FeatureMatrix, Waveform};
