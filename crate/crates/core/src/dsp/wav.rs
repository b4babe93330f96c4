//! Mono WAV input/output (PCM16 and IEEE float32).

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::types::Waveform;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WavFormat {
    #[default]
    Pcm16,
    Float32,
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    let path = path.as_ref();
    read_wav_inner(path).map_err(|e| e.at_path(path))
}

fn read_wav_inner(path: &Path) -> Result<Waveform> {
    let mut reader = WavReader::open(path)?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::format(
            "wav",
            format!("expected mono audio, got {} channels", spec.channels),
        ));
    }
    let samples: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| f64::from(v) / 32768.0))
            .collect::<std::result::Result<_, _>>()?,
        (SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()?,
        (format, bits) => {
            return Err(Error::format(
                "wav",
                format!("unsupported sample format {format:?} with {bits} bits"),
            ))
        }
    };
    Waveform::new(samples, spec.sample_rate)
}

/// Writes `w`; samples outside [-1, 1] are clipped.
pub fn write_wav(path: impl AsRef<Path>, w: &Waveform, format: WavFormat) -> Result<()> {
    let path = path.as_ref();
    write_wav_inner(path, w, format).map_err(|e| e.at_path(path))
}

fn write_wav_inner(path: &Path, w: &Waveform, format: WavFormat) -> Result<()> {
    let (bits_per_sample, sample_format) = match format {
        WavFormat::Pcm16 => (16, SampleFormat::Int),
        WavFormat::Float32 => (32, SampleFormat::Float),
    };
    let spec = WavSpec {
        channels: 1,
        sample_rate: w.sample_rate(),
        bits_per_sample,
        sample_format,
    };
    let mut writer = WavWriter::create(path, spec)?;
    for &s in w.samples() {
        let s = s.clamp(-1.0, 1.0);
        match format {
            WavFormat::Pcm16 => writer.write_sample((s * 32767.0).round() as i16)?,
            WavFormat::Float32 => writer.write_sample(s as f32)?,
        }
    }
    writer.finalize()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float32_round_trip_is_exact_for_f32_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.wav");
        let w = Waveform::new(vec![0.0, 0.5, -0.25, 1.0], 24000).unwrap();
        write_wav(&path, &w, WavFormat::Float32).unwrap();
        assert_eq!(read_wav(&path).unwrap(), w);
    }

    #[test]
    fn pcm16_round_trip_within_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.wav");
        let w = Waveform::new(vec![0.1, -0.7, 0.33, 2.0], 16000).unwrap();
        write_wav(&path, &w, WavFormat::Pcm16).unwrap();
        let back = read_wav(&path).unwrap();
        assert_eq!(back.sample_rate(), 16000);
        for (a, b) in w.samples().iter().zip(back.samples()) {
            assert!((a.clamp(-1.0, 1.0) - b).abs() < 1.0 / 16000.0);
        }
    }

    #[test]
    fn stereo_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.wav");
        let spec = WavSpec {
            channels: 2,
            sample_rate: 16000,
            bits_per_sample: 16,
            sample_format: SampleFormat::Int,
        };
        let mut writer = WavWriter::create(&path, spec).unwrap();
        writer.write_sample(0i16).unwrap();
        writer.write_sample(0i16).unwrap();
        writer.finalize().unwrap();
        let err = read_wav(&path).unwrap_err();
        assert!(err.to_string().contains("mono"), "{err}");
    }

    #[test]
    fn empty_waveform_writes_valid_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.wav");
        write_wav(
            &path,
            &Waveform::silence(0, 16000).unwrap(),
            WavFormat::Pcm16,
        )
        .unwrap();
        assert!(read_wav(&path).unwrap().is_empty());
    }
}
