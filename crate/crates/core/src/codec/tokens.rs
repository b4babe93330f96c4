//! Token streams and the "DUST" token file.
//!
//! Layout (little-endian): magic `DUST`, u32 version, u32 codebook size `V`,
//! u32 stream count `Q`, u64 length `T`, u64/u64 frame rate, then `Q × T`
//! u32 tokens, stream by stream.

use std::path::Path;

use crate::container::{put_u32, put_u64, read_file, write_file, ByteReader};
use crate::error::{Error, Result};
use crate::rate::Rate;

pub const TOKEN_MAGIC: &[u8; 4] = b"DUST";
pub const TOKEN_VERSION: u32 = 1;
const TOKEN_HEADER_LEN: usize = 36;

/// `Q` parallel token streams of equal length over a codebook of size `V`.
///
/// Id `V` is reserved as the stop token of generation and never appears in a
/// stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSequence {
    streams: Vec<Vec<u32>>,
    codebook_size: u32,
    frame_rate: Rate,
}

impl TokenSequence {
    pub fn new(streams: Vec<Vec<u32>>, codebook_size: u32, frame_rate: Rate) -> Result<Self> {
        if streams.is_empty() {
            return Err(Error::invalid("token sequence needs at least one stream"));
        }
        if codebook_size < 2 {
            return Err(Error::invalid(format!(
                "codebook size must be at least 2, got {codebook_size}"
            )));
        }
        let len = streams[0].len();
        if let Some(bad) = streams.iter().find(|s| s.len() != len) {
            return Err(Error::DimensionMismatch {
                expected: len,
                actual: bad.len(),
            });
        }
        for (q, stream) in streams.iter().enumerate() {
            if let Some(t) = stream.iter().position(|&tok| tok >= codebook_size) {
                return Err(Error::TokenOutOfRange {
                    token: stream[t],
                    codebook_size,
                    location: format!("stream {q}, frame {t}"),
                });
            }
        }
        Ok(Self {
            streams,
            codebook_size,
            frame_rate,
        })
    }

    /// A single-stream sequence.
    pub fn single(tokens: Vec<u32>, codebook_size: u32, frame_rate: Rate) -> Result<Self> {
        Self::new(vec![tokens], codebook_size, frame_rate)
    }

    pub fn streams(&self) -> &[Vec<u32>] {
        &self.streams
    }

    pub fn stream(&self, q: usize) -> &[u32] {
        &self.streams[q]
    }

    pub fn codebook_size(&self) -> u32 {
        self.codebook_size
    }

    pub fn stop_token(&self) -> u32 {
        self.codebook_size
    }

    pub fn num_quantizers(&self) -> usize {
        self.streams.len()
    }

    pub fn len(&self) -> usize {
        self.streams[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn frame_rate(&self) -> Rate {
        self.frame_rate
    }

    pub fn duration_seconds(&self) -> f64 {
        self.len() as f64 / self.frame_rate.as_f64()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(TOKEN_HEADER_LEN + 4 * self.len() * self.streams.len());
        out.extend_from_slice(TOKEN_MAGIC);
        put_u32(&mut out, TOKEN_VERSION);
        put_u32(&mut out, self.codebook_size);
        put_u32(&mut out, self.streams.len() as u32);
        put_u64(&mut out, self.len() as u64);
        put_u64(&mut out, self.frame_rate.numerator());
        put_u64(&mut out, self.frame_rate.denominator());
        for stream in &self.streams {
            stream.iter().for_each(|&t| put_u32(&mut out, t));
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        let magic = r.take(4)?;
        if magic != TOKEN_MAGIC {
            return Err(Error::format("token file", format!("bad magic {magic:?}")));
        }
        let version = r.u32()?;
        if version != TOKEN_VERSION {
            return Err(Error::format(
                "token file",
                format!("unsupported version {version}"),
            ));
        }
        let codebook_size = r.u32()?;
        let q = r.u32()? as usize;
        let t = r.u64()?;
        let rate = Rate::new(r.u64()?, r.u64()?)
            .map_err(|e| Error::format("token file", e.to_string()))?;
        if q == 0 {
            return Err(Error::format("token file", "zero streams"));
        }
        let remaining = (bytes.len() - r.offset()) as u64;
        let declared = (q as u64).checked_mul(t).and_then(|n| n.checked_mul(4));
        if declared != Some(remaining) {
            return Err(Error::format(
                "token file",
                format!("header declares {q} x {t} tokens but {remaining} payload bytes follow"),
            ));
        }
        let mut streams = Vec::with_capacity(q);
        for _ in 0..q {
            let mut stream = Vec::with_capacity(t as usize);
            for _ in 0..t {
                let offset = r.offset();
                let token = r.u32()?;
                if token >= codebook_size {
                    return Err(Error::TokenOutOfRange {
                        token,
                        codebook_size,
                        location: format!("byte offset {offset}"),
                    });
                }
                stream.push(token);
            }
            streams.push(stream);
        }
        Self::new(streams, codebook_size, rate)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_file(path.as_ref(), &self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_bytes(&read_file(path)?).map_err(|e| e.at_path(path))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn out_of_range_token_names_offset() {
        let seq = TokenSequence::new(vec![vec![1, 2], vec![3, 0]], 4, Rate::hz(50)).unwrap();
        let mut bytes = seq.to_bytes();
        // second stream, first token
        let offset = TOKEN_HEADER_LEN + 8;
        bytes[offset..offset + 4].copy_from_slice(&4u32.to_le_bytes());
        let err = TokenSequence::from_bytes(&bytes).unwrap_err();
        assert!(
            err.to_string().contains(&format!("byte offset {offset}")),
            "{err}"
        );
    }

    #[test]
    fn construction_validates() {
        assert!(TokenSequence::new(vec![], 4, Rate::hz(50)).is_err());
        assert!(TokenSequence::new(vec![vec![0], vec![]], 4, Rate::hz(50)).is_err());
        assert!(TokenSequence::single(vec![4], 4, Rate::hz(50)).is_err());
        let s = TokenSequence::single(vec![], 4, Rate::hz(50)).unwrap();
        assert!(s.is_empty());
        assert_eq!(s.stop_token(), 4);
    }

    #[test]
    fn length_mismatch_rejected() {
        let seq = TokenSequence::single(vec![1, 2, 3], 4, Rate::hz(50)).unwrap();
        let bytes = seq.to_bytes();
        assert!(TokenSequence::from_bytes(&bytes[..bytes.len() - 4]).is_err());
    }

    proptest! {
        #[test]
        fn round_trip(q in 1usize..4, t in 0usize..40, v in 2u32..2000, salt in any::<u64>()) {
            let streams = (0..q)
                .map(|s| (0..t).map(|i| ((salt.wrapping_mul(31 * s as u64 + i as u64 + 1) >> 7) % v as u64) as u32).collect())
                .collect();
            let seq = TokenSequence::new(streams, v, Rate::new(100, 3).unwrap()).unwrap();
            prop_assert_eq!(TokenSequence::from_bytes(&seq.to_bytes()).unwrap(), seq);
        }
    }
}
