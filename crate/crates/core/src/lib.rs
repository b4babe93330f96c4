//! Discrete speech unit toolkit: a DSP front end, a residual vector quantizer
//! over log-mel frames, combined top-k / top-p / temperature sampling over
//! token streams, a small n-gram token model, random-search tuning of the
//! sampling parameters, and objective metrics (bitrate, MCD, log-F0 RMSE).

pub mod codec;
pub mod container;
pub mod corpus;
pub mod dsp;
pub mod error;
pub mod metrics;
pub mod rate;
pub mod sampler;
pub mod toylm;
pub mod tuner;

pub use error::{Error, Result};
pub use rate::Rate;
