//! Per-utterance evaluation and corpus-level aggregation.

use serde::{Deserialize, Serialize};

use super::distortion::{log_f0_rmse, mcd};
use crate::dsp::{
    estimate_f0_with, log_mel, mel_cepstrum, resample, AnalysisConfig, F0Config, Waveform,
};
use crate::error::{Error, Result};

/// Cepstral coefficients kept for MCD, including the excluded coefficient 0.
pub const DEFAULT_CEPSTRAL_ORDER: usize = 25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationConfig {
    pub analysis: AnalysisConfig,
    pub n_cepstra: usize,
    pub f0: F0Config,
}

impl EvaluationConfig {
    /// Default analysis at `sample_rate`, with F0 frames on the analysis hop.
    pub fn new(sample_rate: u32) -> Self {
        let analysis = AnalysisConfig::new(sample_rate);
        let f0 = F0Config {
            hop: analysis.hop,
            ..F0Config::default()
        };
        Self {
            analysis,
            n_cepstra: DEFAULT_CEPSTRAL_ORDER,
            f0,
        }
    }
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self::new(16000)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceMetrics {
    pub id: String,
    pub mcd_db: f64,
    pub log_f0_rmse: f64,
    pub voiced_pairs: usize,
    pub f0_no_overlap: bool,
    pub reference_frames: usize,
    pub synthesized_frames: usize,
}

/// MCD and log-F0 RMSE of one (reference, synthesized) pair, both resampled
/// to the analysis rate first.
pub fn evaluate_pair(
    id: impl Into<String>,
    reference: &Waveform,
    synthesized: &Waveform,
    config: &EvaluationConfig,
) -> Result<UtteranceMetrics> {
    let sr = config.analysis.sample_rate;
    let reference = resample(reference, sr)?;
    let synthesized = resample(synthesized, sr)?;
    let ref_ceps = mel_cepstrum(&log_mel(&reference, &config.analysis)?, config.n_cepstra)?;
    let syn_ceps = mel_cepstrum(&log_mel(&synthesized, &config.analysis)?, config.n_cepstra)?;
    let f0 = log_f0_rmse(
        &estimate_f0_with(&reference, &config.f0)?,
        &estimate_f0_with(&synthesized, &config.f0)?,
    )?;
    Ok(UtteranceMetrics {
        id: id.into(),
        mcd_db: mcd(&ref_ceps, &syn_ceps)?,
        log_f0_rmse: f0.rmse,
        voiced_pairs: f0.voiced_pairs,
        f0_no_overlap: f0.no_overlap,
        reference_frames: ref_ceps.n_frames(),
        synthesized_frames: syn_ceps.n_frames(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub utterances: usize,
    /// Token bitrate of the synthesized side, when it was measured.
    pub bitrate_bps: Option<f64>,
    /// Mean of the per-utterance MCD values.
    pub mcd_db: f64,
    /// RMSE pooled over every commonly voiced frame of the corpus.
    pub log_f0_rmse: f64,
    pub per_utterance: Vec<UtteranceMetrics>,
}

impl MetricReport {
    pub fn from_utterances(
        per_utterance: Vec<UtteranceMetrics>,
        bitrate_bps: Option<f64>,
    ) -> Result<Self> {
        if per_utterance.is_empty() {
            return Err(Error::Empty("evaluation set".into()));
        }
        let n = per_utterance.len();
        let mcd_db = per_utterance.iter().map(|u| u.mcd_db).sum::<f64>() / n as f64;
        let pairs: usize = per_utterance.iter().map(|u| u.voiced_pairs).sum();
        let log_f0_rmse = if pairs == 0 {
            0.0
        } else {
            let sq: f64 = per_utterance
                .iter()
                .map(|u| u.log_f0_rmse * u.log_f0_rmse * u.voiced_pairs as f64)
                .sum();
            (sq / pairs as f64).sqrt()
        };
        Ok(Self {
            utterances: n,
            bitrate_bps,
            mcd_db,
            log_f0_rmse,
            per_utterance,
        })
    }

    /// Corpus row under the columns Bitrate, MCD, Log F0 RMSE.
    pub fn to_table(&self) -> String {
        let bitrate = self
            .bitrate_bps
            .map_or_else(|| "-".to_string(), |b| format!("{b:.1}"));
        format!(
            "{:>10}  {:>8}  {:>12}\n{:>10}  {:>8.3}  {:>12.4}\n",
            "Bitrate", "MCD", "Log F0 RMSE", bitrate, self.mcd_db, self.log_f0_rmse
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, secs: f64) -> Waveform {
        let n = (16000.0 * secs) as usize;
        let s = (0..n)
            .map(|i| 0.5 * (2.0 * std::f64::consts::PI * freq * i as f64 / 16000.0).sin())
            .collect();
        Waveform::new(s, 16000).unwrap()
    }

    #[test]
    fn self_evaluation_is_zero() {
        let w = tone(180.0, 0.5);
        let m = evaluate_pair("a", &w, &w, &EvaluationConfig::default()).unwrap();
        assert_eq!(m.mcd_db, 0.0);
        assert_eq!(m.log_f0_rmse, 0.0);
        assert!(m.voiced_pairs > 0);
    }

    #[test]
    fn pitch_shift_is_measured() {
        let m = evaluate_pair(
            "a",
            &tone(200.0, 0.5),
            &tone(220.0, 0.5),
            &EvaluationConfig::default(),
        )
        .unwrap();
        assert!(
            (m.log_f0_rmse - 1.1f64.ln()).abs() < 0.01,
            "{}",
            m.log_f0_rmse
        );
        assert!(m.mcd_db > 0.0);
    }

    #[test]
    fn other_rates_are_resampled() {
        let w = tone(180.0, 0.5);
        let up = resample(&w, 24000).unwrap();
        let m = evaluate_pair("a", &w, &up, &EvaluationConfig::default()).unwrap();
        assert_eq!(m.reference_frames, m.synthesized_frames);
        assert!(m.log_f0_rmse < 0.01, "{}", m.log_f0_rmse);
        assert!(m.mcd_db.is_finite());
    }

    #[test]
    fn aggregation() {
        let row = |mcd_db, rmse, pairs| UtteranceMetrics {
            id: String::new(),
            mcd_db,
            log_f0_rmse: rmse,
            voiced_pairs: pairs,
            f0_no_overlap: pairs == 0,
            reference_frames: 1,
            synthesized_frames: 1,
        };
        let r = MetricReport::from_utterances(
            vec![row(2.0, 0.1, 10), row(4.0, 0.3, 30), row(6.0, 0.0, 0)],
            Some(500.0),
        )
        .unwrap();
        assert_eq!(r.utterances, 3);
        assert_eq!(r.mcd_db, 4.0);
        assert!((r.log_f0_rmse - ((0.01 * 10.0 + 0.09 * 30.0) / 40.0f64).sqrt()).abs() < 1e-12);
        let table = r.to_table();
        assert!(table.starts_with("   Bitrate       MCD   Log F0 RMSE"));
        assert!(table.contains("500.0"));
        assert!(MetricReport::from_utterances(vec![], None).is_err());
    }
}
