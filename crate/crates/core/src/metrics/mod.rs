//! Objective evaluation: bitrate, mel-cepstral distortion and log-F0 RMSE.

mod bitrate;
mod distortion;
mod dtw;
mod report;

pub use bitrate::{measured_bitrate, nominal_bitrate, BitrateOptions};
pub use distortion::{frame_distortion, log_f0_rmse, mcd, LogF0Rmse, VOICING_MISMATCH_COST};
pub use dtw::{dtw_align, dtw_by, euclidean, Alignment};
pub use report::{
    evaluate_pair, EvaluationConfig, MetricReport, UtteranceMetrics, DEFAULT_CEPSTRAL_ORDER,
};
