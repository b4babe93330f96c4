//! Mel-cepstral distortion and log-F0 RMSE, both over DTW alignments.

use std::f64::consts::LN_10;

use serde::{Deserialize, Serialize};

use super::dtw::dtw_by;
use crate::dsp::{F0Track, FeatureMatrix};
use crate::error::{Error, Result};

/// Cost of pairing a voiced frame with an unvoiced one when aligning F0 tracks.
pub const VOICING_MISMATCH_COST: f64 = 1.0;

/// Per-frame distortion in dB between two cepstral vectors, coefficient 0 excluded.
pub fn frame_distortion(a: &[f64], b: &[f64]) -> f64 {
    let sq: f64 = a[1..]
        .iter()
        .zip(&b[1..])
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    10.0 / LN_10 * (2.0 * sq).sqrt()
}

/// Mean of [`frame_distortion`] along the minimal-distortion alignment.
pub fn mcd(reference: &FeatureMatrix, synthesized: &FeatureMatrix) -> Result<f64> {
    if reference.dim() != synthesized.dim() {
        return Err(Error::DimensionMismatch {
            expected: reference.dim(),
            actual: synthesized.dim(),
        });
    }
    if reference.dim() < 2 {
        return Err(Error::invalid(
            "MCD needs at least two cepstral coefficients",
        ));
    }
    if reference.frame_rate() != synthesized.frame_rate() {
        return Err(Error::FrameRateMismatch {
            expected: reference.frame_rate().to_string(),
            actual: synthesized.frame_rate().to_string(),
        });
    }
    if reference.n_frames() == 0 || synthesized.n_frames() == 0 {
        return Err(Error::Empty("cepstral sequence for MCD".into()));
    }
    let alignment = dtw_by(reference.n_frames(), synthesized.n_frames(), |i, j| {
        frame_distortion(reference.row(i), synthesized.row(j))
    })?;
    Ok(alignment.mean_cost())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogF0Rmse {
    pub rmse: f64,
    /// Aligned pairs where both frames are voiced.
    pub voiced_pairs: usize,
    /// Set when no aligned pair is voiced in both tracks; `rmse` is then 0.
    pub no_overlap: bool,
}

/// RMSE of `ln f_ref − ln f_syn` over commonly voiced frames.
///
/// The tracks are aligned by DTW with cost `|ln f − ln f′|` for voiced
/// pairs, 0 for unvoiced pairs and [`VOICING_MISMATCH_COST`] otherwise.
pub fn log_f0_rmse(reference: &F0Track, synthesized: &F0Track) -> Result<LogF0Rmse> {
    if reference.frame_rate() != synthesized.frame_rate() {
        return Err(Error::FrameRateMismatch {
            expected: reference.frame_rate().to_string(),
            actual: synthesized.frame_rate().to_string(),
        });
    }
    let none = LogF0Rmse {
        rmse: 0.0,
        voiced_pairs: 0,
        no_overlap: true,
    };
    if reference.is_empty() || synthesized.is_empty() {
        return Ok(none);
    }
    let logs = |t: &F0Track| -> Vec<Option<f64>> {
        t.values()
            .iter()
            .map(|&f| (f > 0.0).then(|| f.ln()))
            .collect()
    };
    let (a, b) = (logs(reference), logs(synthesized));
    let alignment = dtw_by(a.len(), b.len(), |i, j| match (a[i], b[j]) {
        (Some(x), Some(y)) => (x - y).abs(),
        (None, None) => 0.0,
        _ => VOICING_MISMATCH_COST,
    })?;
    let diffs: Vec<f64> = alignment
        .path
        .iter()
        .filter_map(|&(i, j)| Some(a[i]? - b[j]?))
        .collect();
    if diffs.is_empty() {
        return Ok(none);
    }
    Ok(LogF0Rmse {
        rmse: (diffs.iter().map(|d| d * d).sum::<f64>() / diffs.len() as f64).sqrt(),
        voiced_pairs: diffs.len(),
        no_overlap: false,
    })
}
