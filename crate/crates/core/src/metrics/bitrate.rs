//! Nominal and corpus-measured token bitrates.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::codec::TokenSequence;
use crate::error::{Error, Result};
use crate::rate::Rate;

/// `Q · log2(V) · frame_rate` bits per second.
pub fn nominal_bitrate(
    codebook_size: usize,
    num_quantizers: usize,
    frame_rate: Rate,
) -> Result<f64> {
    if codebook_size < 2 {
        return Err(Error::invalid(format!(
            "codebook size must be at least 2, got {codebook_size}"
        )));
    }
    if num_quantizers == 0 {
        return Err(Error::invalid("at least one quantizer is required"));
    }
    Ok(
        num_quantizers as f64 * (codebook_size as f64).log2() * frame_rate.numerator() as f64
            / frame_rate.denominator() as f64,
    )
}

/// How [`measured_bitrate`] counts symbols.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitrateOptions {
    /// Count one stop symbol per stream at the end of each utterance, and the
    /// stop id as an extra distinct value.
    pub count_stop_tokens: bool,
    /// Use each utterance's own distinct-value count instead of the corpus-wide one.
    pub per_utterance_vocabulary: bool,
}

fn distinct_values<'a>(
    seqs: impl IntoIterator<Item = &'a TokenSequence>,
    with_stop: bool,
) -> usize {
    let mut seen = BTreeSet::new();
    for seq in seqs {
        for stream in seq.streams() {
            seen.extend(stream.iter().copied());
        }
        if with_stop {
            seen.insert(seq.stop_token());
        }
    }
    seen.len().max(2)
}

/// `Σ T·Q·log2(V_used) / Σ duration`, where `V_used` is the number of distinct
/// token values that occur, at least 2.
pub fn measured_bitrate(
    sequences: &[TokenSequence],
    durations: &[f64],
    options: BitrateOptions,
) -> Result<f64> {
    if sequences.is_empty() {
        return Err(Error::Empty("corpus for bitrate measurement".into()));
    }
    if sequences.len() != durations.len() {
        return Err(Error::DimensionMismatch {
            expected: sequences.len(),
            actual: durations.len(),
        });
    }
    if let Some(d) = durations.iter().find(|d| !(d.is_finite() && **d > 0.0)) {
        return Err(Error::invalid(format!(
            "utterance durations must be positive, got {d}"
        )));
    }
    let corpus_vocab = distinct_values(sequences, options.count_stop_tokens);
    let mut bits = 0.0;
    for seq in sequences {
        let symbols = seq.len() + usize::from(options.count_stop_tokens);
        let vocab = if options.per_utterance_vocabulary {
            distinct_values([seq], options.count_stop_tokens)
        } else {
            corpus_vocab
        };
        bits += (symbols * seq.num_quantizers()) as f64 * (vocab as f64).log2();
    }
    Ok(bits / durations.iter().sum::<f64>())
}
