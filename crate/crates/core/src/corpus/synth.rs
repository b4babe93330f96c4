//! Seeded synthetic corpora of harmonic sine mixtures.
//!
//! Voiced styles are harmonic series with a pitch glide; `happy` adds
//! vibrato, `laughing` gates a high-pitched voice at about 5 Hz and
//! `whisper` is quiet low-passed noise. Every utterance gets its own random
//! stream, so changing the count does not alter earlier utterances.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::manifest::{CorpusManifest, Split, UtteranceEntry};
use crate::dsp::wav::{write_wav, WavFormat};
use crate::dsp::Waveform;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_utterances: usize,
    pub sample_rate: u32,
    pub seed: u64,
    /// Assigned to utterances in rotation.
    pub styles: Vec<String>,
    pub min_duration: f64,
    pub max_duration: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_utterances: 10,
            sample_rate: 16000,
            seed: 0,
            styles: ["read", "happy", "whisper", "laughing"]
                .map(String::from)
                .to_vec(),
            min_duration: 0.6,
            max_duration: 1.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthUtterance {
    pub entry: UtteranceEntry,
    pub waveform: Waveform,
}

fn split_for(index: usize) -> Split {
    match index % 10 {
        8 => Split::Dev,
        9 => Split::Test,
        _ => Split::Train,
    }
}

fn envelope(i: usize, n: usize, sr: f64) -> f64 {
    let ramp = (0.05 * sr) as usize;
    let edge = i.min(n - 1 - i);
    if edge >= ramp {
        1.0
    } else {
        0.5 - 0.5 * (PI * edge as f64 / ramp as f64).cos()
    }
}

fn voiced(
    rng: &mut ChaCha8Rng,
    n: usize,
    sr: f64,
    f0_range: (f64, f64),
    vibrato: f64,
    gate_hz: f64,
) -> Vec<f64> {
    let f_start = rng.gen_range(f0_range.0..f0_range.1);
    let f_end = f_start * rng.gen_range(0.8..1.2);
    let amps: Vec<f64> = (1..=6)
        .map(|h| rng.gen_range(0.5..1.0) / h as f64)
        .collect();
    let norm: f64 = amps.iter().sum();
    let mut phase = 0.0;
    (0..n)
        .map(|i| {
            let t = i as f64 / sr;
            let frac = i as f64 / n as f64;
            let f0 =
                (f_start + (f_end - f_start) * frac) * (1.0 + vibrato * (2.0 * PI * 6.0 * t).sin());
            phase += 2.0 * PI * f0 / sr;
            let tone: f64 = amps
                .iter()
                .enumerate()
                .map(|(h, a)| a * ((h + 1) as f64 * phase).sin())
                .sum();
            let gate = if gate_hz > 0.0 {
                (0.5 - 0.5 * (2.0 * PI * gate_hz * t).cos()).powi(2)
            } else {
                1.0
            };
            0.5 * tone / norm * gate
        })
        .collect()
}

fn whisper(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut state = 0.0;
    (0..n)
        .map(|_| {
            state = 0.7 * state + 0.3 * rng.gen_range(-1.0..1.0);
            0.05 * state
        })
        .collect()
}

/// Generates the corpus in memory. Audio paths are `wav/<id>.wav`.
pub fn synthesize_corpus(spec: &SynthSpec) -> Result<Vec<SynthUtterance>> {
    if spec.styles.is_empty() {
        return Err(Error::invalid("at least one style is required"));
    }
    if !(spec.min_duration > 0.0 && spec.min_duration <= spec.max_duration) {
        return Err(Error::invalid("durations must satisfy 0 < min <= max"));
    }
    let sr = f64::from(spec.sample_rate);
    (0..spec.n_utterances)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(i as u64);
            let style = &spec.styles[i % spec.styles.len()];
            let duration = if spec.min_duration < spec.max_duration {
                rng.gen_range(spec.min_duration..spec.max_duration)
            } else {
                spec.min_duration
            };
            let n = ((duration * sr).round() as usize).max(2);
            let raw = match style.as_str() {
                "whisper" => whisper(&mut rng, n),
                "laughing" => voiced(&mut rng, n, sr, (250.0, 350.0), 0.0, 5.0),
                "happy" => voiced(&mut rng, n, sr, (180.0, 280.0), 0.05, 0.0),
                _ => voiced(&mut rng, n, sr, (100.0, 220.0), 0.0, 0.0),
            };
            let samples = raw
                .iter()
                .enumerate()
                .map(|(j, s)| s * envelope(j, n, sr))
                .collect();
            let id = format!("synth{i:04}");
            Ok(SynthUtterance {
                entry: UtteranceEntry {
                    audio_path: format!("wav/{id}.wav"),
                    id,
                    style_tag: style.clone(),
                    duration: n as f64 / sr,
                    transcript: None,
                    split: split_for(i),
                },
                waveform: Waveform::new(samples, spec.sample_rate)?,
            })
        })
        .collect()
}

/// Writes `wav/*.wav` (16-bit PCM) and `manifest.jsonl` under `dir`.
pub fn write_synthetic_corpus(dir: impl AsRef<Path>, spec: &SynthSpec) -> Result<CorpusManifest> {
    let dir = dir.as_ref();
    let wav_dir = dir.join("wav");
    std::fs::create_dir_all(&wav_dir).map_err(|e| Error::from(e).at_path(&wav_dir))?;
    let utterances = synthesize_corpus(spec)?;
    for u in &utterances {
        write_wav(dir.join(&u.entry.audio_path), &u.waveform, WavFormat::Pcm16)?;
    }
    let manifest = CorpusManifest::new(
        "manifest",
        dir,
        utterances.into_iter().map(|u| u.entry).collect(),
    )?;
    manifest.save(dir.join("manifest.jsonl"))?;
    Ok(manifest)
}
