//! Residual vector quantizer over feature frames.

pub mod kmeans;
mod rvq;
mod tokens;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rate::Rate;

pub use rvq::{
    decode, encode, quantization_report, train_codebooks, Codebook, QuantizationReport, RvqCodec,
};
pub use tokens::{TokenSequence, TOKEN_MAGIC, TOKEN_VERSION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CodecConfig {
    pub codebook_size: usize,
    pub num_quantizers: usize,
    pub hop: usize,
    pub sample_rate: u32,
    pub feature_dim: usize,
    pub commitment_weight: f64,
    pub codebook_weight: f64,
    pub mel_loss_weight: f64,
    pub kmeans_iters: usize,
    pub seed: u64,
}

impl Default for CodecConfig {
    fn default() -> Self {
        Self::vocoder_16k()
    }
}

impl CodecConfig {
    /// Two quantizers of 1024 codes at 16 kHz.
    pub fn vocoder_16k() -> Self {
        Self {
            codebook_size: 1024,
            num_quantizers: 2,
            hop: 480,
            sample_rate: 16000,
            feature_dim: 80,
            commitment_weight: 2.0,
            codebook_weight: 8.0,
            mel_loss_weight: 15.0,
            kmeans_iters: 50,
            seed: 0,
        }
    }

    /// A single quantizer of `codebook_size` codes at 16 kHz.
    pub fn acoustic(codebook_size: usize) -> Self {
        Self {
            codebook_size,
            num_quantizers: 1,
            ..Self::vocoder_16k()
        }
    }

    pub fn frame_rate(&self) -> Result<Rate> {
        Rate::from_hop(self.sample_rate, self.hop)
    }

    pub fn validate(&self) -> Result<()> {
        if self.codebook_size < 2 {
            return Err(Error::invalid("codebook size must be at least 2"));
        }
        if u32::try_from(self.codebook_size).is_err() {
            return Err(Error::invalid("codebook size must fit in 32 bits"));
        }
        if self.num_quantizers == 0 {
            return Err(Error::invalid("need at least one quantizer"));
        }
        if self.hop == 0 || self.sample_rate == 0 {
            return Err(Error::invalid("hop and sample rate must be positive"));
        }
        if self.feature_dim == 0 {
            return Err(Error::invalid("feature dimension must be at least 1"));
        }
        for (name, w) in [
            ("commitment", self.commitment_weight),
            ("codebook", self.codebook_weight),
            ("mel loss", self.mel_loss_weight),
        ] {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::invalid(format!(
                    "{name} weight must be finite and >= 0, got {w}"
                )));
            }
        }
        Ok(())
    }
}
