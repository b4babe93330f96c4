use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rate::Rate;

/// A mono time-domain signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl Waveform {
    /// Builds a waveform, rejecting a zero rate and non-finite samples.
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::invalid("sample rate must be positive"));
        }
        check_finite(&samples)?;
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn silence(len: usize, sample_rate: u32) -> Result<Self> {
        Self::new(vec![0.0; len], sample_rate)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }

    pub fn rms(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        (self.samples.iter().map(|x| x * x).sum::<f64>() / self.samples.len() as f64).sqrt()
    }
}

pub(crate) fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { index }),
        None => Ok(()),
    }
}

/// What a [`FeatureMatrix`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureKind {
    MelSpectrogram = 0,
    MelCepstrum = 1,
    Decoded = 2,
}

/// Frames × dimensions real matrix, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    data: Vec<f64>,
    n_frames: usize,
    dim: usize,
    frame_rate: Rate,
    kind: FeatureKind,
}

impl FeatureMatrix {
    pub fn new(
        data: Vec<f64>,
        n_frames: usize,
        dim: usize,
        frame_rate: Rate,
        kind: FeatureKind,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("feature dimension must be at least 1"));
        }
        if data.len() != n_frames * dim {
            return Err(Error::DimensionMismatch {
                expected: n_frames * dim,
                actual: data.len(),
            });
        }
        check_finite(&data)?;
        Ok(Self {
            data,
            n_frames,
            dim,
            frame_rate,
            kind,
        })
    }

    /// Builds a matrix from equal-length rows.
    pub fn from_rows(
        rows: &[Vec<f64>],
        dim: usize,
        frame_rate: Rate,
        kind: FeatureKind,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(data, rows.len(), dim, frame_rate, kind)
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn frame_rate(&self) -> Rate {
        self.frame_rate
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dim)
    }

    /// Returns a copy with the rows in `range` only.
    pub fn slice_frames(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            data: self.data[range.start * self.dim..range.end * self.dim].to_vec(),
            n_frames: range.len(),
            dim: self.dim,
            frame_rate: self.frame_rate,
            kind: self.kind,
        }
    }
}

/// Per-frame fundamental frequency in Hz, 0 meaning unvoiced.
#[derive(Debug, Clone, PartialEq)]
pub struct F0Track {
    values: Vec<f64>,
    frame_rate: Rate,
}

impl F0Track {
    pub fn new(values: Vec<f64>, frame_rate: Rate) -> Result<Self> {
        check_finite(&values)?;
        if let Some(index) = values.iter().position(|&v| v < 0.0) {
            return Err(Error::invalid(format!(
                "negative F0 {} at frame {index}",
                values[index]
            )));
        }
        Ok(Self { values, frame_rate })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn frame_rate(&self) -> Rate {
        self.frame_rate
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn voiced_fraction(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.values.iter().filter(|&&v| v > 0.0).count() as f64 / self.values.len() as f64
    }
}
