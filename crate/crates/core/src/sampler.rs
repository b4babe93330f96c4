//! Combined top-k / top-p / temperature sampling and the stop-token
//! generation loop.
//!
//! Logits are tempered and softmaxed first. The candidate set is the
//! intersection of the `k` most probable tokens with the nucleus, the
//! shortest most-probable-first prefix whose mass reaches `p`. The draw is
//! made from the candidates' renormalized probabilities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::codec::TokenSequence;
use crate::dsp::check_finite;
use crate::error::{Error, Result};
use crate::rate::Rate;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingParams {
    pub k: usize,
    pub p: f64,
    pub temperature: f64,
}

impl SamplingParams {
    pub fn new(k: usize, p: f64, temperature: f64) -> Result<Self> {
        let params = Self { k, p, temperature };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(Error::invalid(format!(
                "p must lie in (0, 1], got {}",
                self.p
            )));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::invalid(format!(
                "temperature must be positive, got {}",
                self.temperature
            )));
        }
        Ok(())
    }
}

impl Default for SamplingParams {
    fn default() -> Self {
        Self {
            k: 50,
            p: 1.0,
            temperature: 1.0,
        }
    }
}

/// Generator used for token sampling throughout the toolkit.
pub type TokenRng = ChaCha8Rng;

/// Stream `stream` of the generator seeded with `seed`; distinct streams are
/// independent, so batch item `i` can use stream `i`.
pub fn stream_rng(seed: u64, stream: u64) -> TokenRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Softmax of `logits / temperature`, with the maximum subtracted first.
pub fn apply_temperature(logits: &[f64], temperature: f64) -> Result<Vec<f64>> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::invalid(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    if logits.is_empty() {
        return Err(Error::Empty("logit vector".into()));
    }
    check_finite(logits)?;
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits
        .iter()
        .map(|l| ((l - max) / temperature).exp())
        .collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// Token ids ordered by descending probability, ties by ascending id.
fn ranked(probs: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
    order
}

/// Membership mask of `TopK(probs, k) ∩ Nucleus(probs, p)`.
///
/// Both sets are prefixes of the same ranking, so the mask is the first
/// `min(k, nucleus length)` ranked tokens and always holds the argmax.
pub fn filter_candidates(probs: &[f64], k: usize, p: f64) -> Vec<bool> {
    let order = ranked(probs);
    let mut nucleus = order.len();
    let mut mass = 0.0;
    for (i, &tok) in order.iter().enumerate() {
        mass += probs[tok];
        if mass >= p {
            nucleus = i + 1;
            break;
        }
    }
    let keep = k.max(1).min(nucleus);
    let mut mask = vec![false; probs.len()];
    for &tok in &order[..keep] {
        mask[tok] = true;
    }
    mask
}

/// The distribution `sample_token` draws from: tempered softmax restricted
/// to the candidate mask and renormalized.
pub fn filtered_distribution(logits: &[f64], params: &SamplingParams) -> Result<Vec<f64>> {
    params.validate()?;
    let probs = apply_temperature(logits, params.temperature)?;
    let mask = filter_candidates(&probs, params.k, params.p);
    let kept: f64 = probs
        .iter()
        .zip(&mask)
        .filter(|(_, &m)| m)
        .map(|(p, _)| p)
        .sum();
    Ok(probs
        .iter()
        .zip(&mask)
        .map(|(&p, &m)| if m { p / kept } else { 0.0 })
        .collect())
}

/// Draws one token id by inverse CDF over the filtered distribution, scanning
/// candidates in ascending id order.
pub fn sample_token<R: Rng + ?Sized>(
    logits: &[f64],
    params: &SamplingParams,
    rng: &mut R,
) -> Result<u32> {
    let dist = filtered_distribution(logits, params)?;
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (tok, &p) in dist.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = tok;
            if u < acc {
                return Ok(tok as u32);
            }
        }
    }
    Ok(last as u32)
}

/// A next-token distribution over `codebook_size() + 1` ids, the last being
/// the stop token.
pub trait LogitSource {
    fn codebook_size(&self) -> u32;

    fn frame_rate(&self) -> Rate;

    /// Logits for the token following `context`.
    fn logits(&self, context: &[u32]) -> Vec<f64>;

    fn stop_token(&self) -> u32 {
        self.codebook_size()
    }
}

impl<T: LogitSource + ?Sized> LogitSource for &T {
    fn codebook_size(&self) -> u32 {
        (**self).codebook_size()
    }

    fn frame_rate(&self) -> Rate {
        (**self).frame_rate()
    }

    fn logits(&self, context: &[u32]) -> Vec<f64> {
        (**self).logits(context)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// The stop token was drawn.
    Stopped,
    /// `max_len` tokens were produced without drawing the stop token.
    Truncated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generation {
    pub tokens: TokenSequence,
    pub termination: Termination,
}

impl Generation {
    pub fn truncated(&self) -> bool {
        self.termination == Termination::Truncated
    }
}

/// Samples tokens until the stop token or `max_len` tokens.
pub fn generate<M, R>(
    model: &M,
    params: &SamplingParams,
    max_len: usize,
    rng: &mut R,
) -> Result<Generation>
where
    M: LogitSource + ?Sized,
    R: Rng + ?Sized,
{
    generate_from(model, &[], params, max_len, rng)
}

/// [`generate`] continuing after `prompt`; the prompt is not part of the output.
pub fn generate_from<M, R>(
    model: &M,
    prompt: &[u32],
    params: &SamplingParams,
    max_len: usize,
    rng: &mut R,
) -> Result<Generation>
where
    M: LogitSource + ?Sized,
    R: Rng + ?Sized,
{
    params.validate()?;
    if max_len == 0 {
        return Err(Error::invalid("max_len must be at least 1"));
    }
    let stop = model.stop_token();
    let vocab = stop as usize + 1;
    let mut context = prompt.to_vec();
    let mut out = Vec::new();
    let mut termination = Termination::Truncated;
    while out.len() < max_len {
        let logits = model.logits(&context);
        if logits.len() != vocab {
            return Err(Error::DimensionMismatch {
                expected: vocab,
                actual: logits.len(),
            });
        }
        let tok = sample_token(&logits, params, rng)?;
        if tok == stop {
            termination = Termination::Stopped;
            break;
        }
        out.push(tok);
        context.push(tok);
    }
    Ok(Generation {
        tokens: TokenSequence::single(out, model.codebook_size(), model.frame_rate())?,
        termination,
    })
}
