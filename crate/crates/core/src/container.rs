//! Little-endian binary containers.
//!
//! Every "DUSS" file starts with a 44-byte header:
//!
//! | offset | type     | field                          |
//! |--------|----------|--------------------------------|
//! | 0      | [u8; 4]  | magic `DUSS`                   |
//! | 4      | u32      | version (currently 1)          |
//! | 8      | u32      | kind, see [`ContainerKind`]    |
//! | 12     | u64      | rows `T`                       |
//! | 20     | u64      | columns `D`                    |
//! | 28     | u64, u64 | frame rate numerator/denominator |
//!
//! Feature matrices and F0 tracks (`D = 1`) follow with `T × D` row-major
//! f64 values. Codec and n-gram payloads are documented on their writers.

use std::path::Path;

use crate::dsp::{F0Track, FeatureKind, FeatureMatrix};
use crate::error::{Error, Result};
use crate::rate::Rate;

pub const MAGIC: &[u8; 4] = b"DUSS";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 44;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
pub enum ContainerKind {
    MelSpectrogram = 0,
    MelCepstrum = 1,
    Decoded = 2,
    F0Track = 3,
    Codec = 4,
    Ngram = 5,
}

impl ContainerKind {
    fn from_code(code: u32) -> Option<Self> {
        Some(match code {
            0 => Self::MelSpectrogram,
            1 => Self::MelCepstrum,
            2 => Self::Decoded,
            3 => Self::F0Track,
            4 => Self::Codec,
            5 => Self::Ngram,
            _ => return None,
        })
    }

    fn of_features(kind: FeatureKind) -> Self {
        match kind {
            FeatureKind::MelSpectrogram => Self::MelSpectrogram,
            FeatureKind::MelCepstrum => Self::MelCepstrum,
            FeatureKind::Decoded => Self::Decoded,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Header {
    pub kind: ContainerKind,
    pub rows: u64,
    pub cols: u64,
    pub rate: Rate,
}

impl Header {
    pub fn write(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(MAGIC);
        put_u32(out, VERSION);
        put_u32(out, self.kind as u32);
        put_u64(out, self.rows);
        put_u64(out, self.cols);
        put_u64(out, self.rate.numerator());
        put_u64(out, self.rate.denominator());
    }

    pub fn read(r: &mut ByteReader<'_>) -> Result<Self> {
        let magic = r.take(4)?;
        if magic != MAGIC {
            return Err(Error::format("container", format!("bad magic {magic:?}")));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::format(
                "container",
                format!("unsupported version {version}"),
            ));
        }
        let code = r.u32()?;
        let kind = ContainerKind::from_code(code)
            .ok_or_else(|| Error::format("container", format!("unknown kind {code}")))?;
        let rows = r.u64()?;
        let cols = r.u64()?;
        let (num, den) = (r.u64()?, r.u64()?);
        let rate = Rate::new(num, den).map_err(|e| Error::format("container", e.to_string()))?;
        Ok(Self {
            kind,
            rows,
            cols,
            rate,
        })
    }

    pub fn expect(&self, kind: ContainerKind) -> Result<()> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(Error::format(
                "container",
                format!("expected {kind:?} payload, found {:?}", self.kind),
            ))
        }
    }
}

pub(crate) fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn put_f64(out: &mut Vec<u8>, v: f64) {
    out.extend_from_slice(&v.to_le_bytes());
}

/// Cursor over a byte slice that reports truncation with the failing offset.
pub(crate) struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    pub fn offset(&self) -> usize {
        self.pos
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::format(
                "container",
                format!("truncated at byte {}: need {n} more bytes", self.pos),
            ));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    /// Reads `n` f64 values, checking the length against the remaining bytes first.
    pub fn f64s(&mut self, n: u64) -> Result<Vec<f64>> {
        let bytes = usize::try_from(n)
            .ok()
            .and_then(|n| n.checked_mul(8))
            .ok_or_else(|| Error::format("container", format!("implausible length {n}")))?;
        Ok(self
            .take(bytes)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }

    pub fn finish(&self) -> Result<()> {
        if self.pos == self.bytes.len() {
            Ok(())
        } else {
            Err(Error::format(
                "container",
                format!(
                    "{} trailing bytes after offset {}",
                    self.bytes.len() - self.pos,
                    self.pos
                ),
            ))
        }
    }
}

pub fn features_to_bytes(m: &FeatureMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + m.data().len() * 8);
    Header {
        kind: ContainerKind::of_features(m.kind()),
        rows: m.n_frames() as u64,
        cols: m.dim() as u64,
        rate: m.frame_rate(),
    }
    .write(&mut out);
    m.data().iter().for_each(|&v| put_f64(&mut out, v));
    out
}

pub fn features_from_bytes(bytes: &[u8]) -> Result<FeatureMatrix> {
    let mut r = ByteReader::new(bytes);
    let header = Header::read(&mut r)?;
    let kind = match header.kind {
        ContainerKind::MelSpectrogram => FeatureKind::MelSpectrogram,
        ContainerKind::MelCepstrum => FeatureKind::MelCepstrum,
        ContainerKind::Decoded => FeatureKind::Decoded,
        other => {
            return Err(Error::format(
                "container",
                format!("expected a feature matrix, found {other:?}"),
            ))
        }
    };
    let count = header
        .rows
        .checked_mul(header.cols)
        .ok_or_else(|| Error::format("container", "shape overflows"))?;
    let data = r.f64s(count)?;
    r.finish()?;
    FeatureMatrix::new(
        data,
        header.rows as usize,
        header.cols as usize,
        header.rate,
        kind,
    )
}

pub fn f0_to_bytes(track: &F0Track) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + track.len() * 8);
    Header {
        kind: ContainerKind::F0Track,
        rows: track.len() as u64,
        cols: 1,
        rate: track.frame_rate(),
    }
    .write(&mut out);
    track.values().iter().for_each(|&v| put_f64(&mut out, v));
    out
}

pub fn f0_from_bytes(bytes: &[u8]) -> Result<F0Track> {
    let mut r = ByteReader::new(bytes);
    let header = Header::read(&mut r)?;
    header.expect(ContainerKind::F0Track)?;
    if header.cols != 1 {
        return Err(Error::format(
            "container",
            format!("F0 track with {} columns", header.cols),
        ));
    }
    let values = r.f64s(header.rows)?;
    r.finish()?;
    F0Track::new(values, header.rate)
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::from(e).at_path(path))
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::from(e).at_path(path))
}

pub fn save_features(path: impl AsRef<Path>, m: &FeatureMatrix) -> Result<()> {
    write_file(path.as_ref(), &features_to_bytes(m))
}

pub fn load_features(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    features_from_bytes(&read_file(path)?).map_err(|e| e.at_path(path))
}

pub fn save_f0(path: impl AsRef<Path>, track: &F0Track) -> Result<()> {
    write_file(path.as_ref(), &f0_to_bytes(track))
}

pub fn load_f0(path: impl AsRef<Path>) -> Result<F0Track> {
    let path = path.as_ref();
    f0_from_bytes(&read_file(path)?).map_err(|e| e.at_path(path))
}
