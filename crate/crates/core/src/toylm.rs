//! Order-n Markov token model with additive smoothing.
//!
//! The vocabulary is the codec's `V` tokens plus the stop id `V`. Training
//! appends the stop id to every utterance and counts successors for every
//! context of length `0..n`, where contexts near the start of an utterance
//! are correspondingly shorter.
//!
//! A query keeps its last `n − 1` tokens and backs off to the longest stored
//! suffix. The empty context holds the counts seen at utterance starts and
//! below, so an empty query (utterance start) uses it; a non-empty query
//! with no stored non-empty suffix has never been observed and gets the
//! uniform smoothed distribution.

use std::collections::BTreeMap;
use std::path::Path;

use crate::codec::TokenSequence;
use crate::container::{
    put_f64, put_u32, put_u64, read_file, write_file, ByteReader, ContainerKind, Header,
};
use crate::error::{Error, Result};
use crate::rate::Rate;
use crate::sampler::LogitSource;

pub const DEFAULT_ORDER: usize = 3;
pub const DEFAULT_ALPHA: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct NgramModel {
    order: usize,
    alpha: f64,
    codebook_size: u32,
    frame_rate: Rate,
    counts: BTreeMap<Vec<u32>, Vec<u64>>,
}

impl NgramModel {
    /// A model with no observations: every context gives the uniform distribution.
    pub fn empty(codebook_size: u32, frame_rate: Rate, order: usize, alpha: f64) -> Result<Self> {
        if order == 0 {
            return Err(Error::invalid("n-gram order must be at least 1"));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::invalid(format!(
                "smoothing alpha must be positive, got {alpha}"
            )));
        }
        if codebook_size < 2 {
            return Err(Error::invalid("codebook size must be at least 2"));
        }
        Ok(Self {
            order,
            alpha,
            codebook_size,
            frame_rate,
            counts: BTreeMap::new(),
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Number of ids including the stop id.
    pub fn vocab_size(&self) -> usize {
        self.codebook_size as usize + 1
    }

    pub fn num_contexts(&self) -> usize {
        self.counts.len()
    }

    /// Raw successor counts stored for exactly `context`.
    pub fn counts(&self, context: &[u32]) -> Option<&[u64]> {
        self.counts.get(context).map(Vec::as_slice)
    }

    fn observe(&mut self, utterance: &[u32]) {
        let vocab = self.vocab_size();
        let stop = self.codebook_size;
        let seq: Vec<u32> = utterance.iter().copied().chain([stop]).collect();
        for i in 0..seq.len() {
            for len in 0..self.order.min(i + 1) {
                let row = self
                    .counts
                    .entry(seq[i - len..i].to_vec())
                    .or_insert_with(|| vec![0; vocab]);
                row[seq[i] as usize] += 1;
            }
        }
    }

    /// Counts of the context actually used for `context` after back-off.
    fn resolve(&self, context: &[u32]) -> Option<&[u64]> {
        let keep = context.len().min(self.order - 1);
        let tail = &context[context.len() - keep..];
        if tail.is_empty() {
            return self.counts(&[]);
        }
        (1..=tail.len())
            .rev()
            .find_map(|len| self.counts(&tail[tail.len() - len..]))
    }

    /// Smoothed next-token probabilities.
    pub fn distribution(&self, context: &[u32]) -> Vec<f64> {
        let vocab = self.vocab_size();
        match self.resolve(context) {
            Some(row) => {
                let total: u64 = row.iter().sum();
                let denom = total as f64 + self.alpha * vocab as f64;
                row.iter()
                    .map(|&c| (c as f64 + self.alpha) / denom)
                    .collect()
            }
            None => vec![1.0 / vocab as f64; vocab],
        }
    }

    /// Payload after the header: u32 order, f64 alpha, u32 codebook size,
    /// u64 context count, then per context a u32 length, its tokens as u32
    /// and `V + 1` u64 counts, in lexicographic context order.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        Header {
            kind: ContainerKind::Ngram,
            rows: self.counts.len() as u64,
            cols: self.vocab_size() as u64,
            rate: self.frame_rate,
        }
        .write(&mut out);
        put_u32(&mut out, self.order as u32);
        put_f64(&mut out, self.alpha);
        put_u32(&mut out, self.codebook_size);
        put_u64(&mut out, self.counts.len() as u64);
        for (ctx, row) in &self.counts {
            put_u32(&mut out, ctx.len() as u32);
            for &t in ctx {
                put_u32(&mut out, t);
            }
            for &c in row {
                put_u64(&mut out, c);
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        let header = Header::read(&mut r)?;
        header.expect(ContainerKind::Ngram)?;
        let order = r.u32()? as usize;
        let alpha = r.f64()?;
        let codebook_size = r.u32()?;
        let mut model = Self::empty(codebook_size, header.rate, order, alpha)
            .map_err(|e| Error::format("n-gram model", e.to_string()))?;
        let vocab = model.vocab_size();
        if header.cols != vocab as u64 {
            return Err(Error::format(
                "n-gram model",
                format!(
                    "header declares {} columns for vocabulary {vocab}",
                    header.cols
                ),
            ));
        }
        let n_contexts = r.u64()?;
        if n_contexts != header.rows {
            return Err(Error::format(
                "n-gram model",
                "context count disagrees with header",
            ));
        }
        for _ in 0..n_contexts {
            let len = r.u32()? as usize;
            if len >= order {
                return Err(Error::format(
                    "n-gram model",
                    format!("context of length {len} in an order-{order} model"),
                ));
            }
            let ctx = (0..len).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
            let row = (0..vocab).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
            model.counts.insert(ctx, row);
        }
        r.finish()?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_file(path.as_ref(), &self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_bytes(&read_file(path)?).map_err(|e| e.at_path(path))
    }
}

impl LogitSource for NgramModel {
    fn codebook_size(&self) -> u32 {
        self.codebook_size
    }

    fn frame_rate(&self) -> Rate {
        self.frame_rate
    }

    fn logits(&self, context: &[u32]) -> Vec<f64> {
        self.distribution(context)
            .into_iter()
            .map(f64::ln)
            .collect()
    }
}

/// Counts every corpus utterance into a fresh model. All corpora must be
/// single-stream and share `codebook_size` and `frame_rate`.
pub fn train_ngram(
    corpora: &[TokenSequence],
    codebook_size: u32,
    frame_rate: Rate,
    order: usize,
    alpha: f64,
) -> Result<NgramModel> {
    let mut model = NgramModel::empty(codebook_size, frame_rate, order, alpha)?;
    for (i, seq) in corpora.iter().enumerate() {
        if seq.codebook_size() != codebook_size {
            return Err(Error::VocabularyMismatch {
                expected: format!("codebook size {codebook_size}"),
                actual: format!("codebook size {} in sequence {i}", seq.codebook_size()),
            });
        }
        if seq.frame_rate() != frame_rate {
            return Err(Error::FrameRateMismatch {
                expected: frame_rate.to_string(),
                actual: seq.frame_rate().to_string(),
            });
        }
        if seq.num_quantizers() != 1 {
            return Err(Error::invalid(format!(
                "sequence {i} has {} token streams; the n-gram model takes single-stream sequences",
                seq.num_quantizers()
            )));
        }
        model.observe(seq.stream(0));
    }
    Ok(model)
}
