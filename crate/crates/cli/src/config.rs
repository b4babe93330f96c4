//! Pipeline configuration: presets, `key = value` files and flag overrides.
//!
//! Resolution order is defaults, then the preset (from the flag, else the
//! file), then file entries, then `--set` and per-command flags. The seed
//! comes from `--seed`, else the file, else `DUSS_SEED`, else 0.

use std::fmt::Write as _;
use std::str::FromStr;

use duss_core::codec::CodecConfig;
use duss_core::dsp::{AnalysisConfig, WindowKind};
use duss_core::sampler::SamplingParams;
use duss_core::toylm::{DEFAULT_ALPHA, DEFAULT_ORDER};
use duss_core::tuner::{SearchSpace, DEFAULT_BINS, DEFAULT_TRIALS};
use duss_core::{Error, Result};

pub const PRESETS: [&str; 4] = [
    "vocoder-16k",
    "acoustic-1024",
    "acoustic-512",
    "acoustic-256",
];

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub codec: CodecConfig,
    pub sampling: SamplingParams,
    pub space: SearchSpace,
    pub n_trials: usize,
    pub importance_bins: usize,
    pub frame_len: usize,
    pub fmin: f64,
    pub fmax: Option<f64>,
    pub lm_order: usize,
    pub lm_alpha: f64,
    pub max_len: usize,
    pub griffin_lim_iterations: usize,
    pub excluded_styles: Vec<String>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self::preset("vocoder-16k").expect("built-in preset")
    }
}

impl PipelineConfig {
    /// `vocoder-16k`: two 1024-code quantizers at 16 kHz. `acoustic-V`: one
    /// V-code quantizer with the best sampling triple reported for that size.
    pub fn preset(name: &str) -> Result<Self> {
        let (codec, sampling) = match name {
            "vocoder-16k" => (CodecConfig::vocoder_16k(), SamplingParams::default()),
            "acoustic-1024" => (
                CodecConfig::acoustic(1024),
                SamplingParams::new(11, 0.186, 0.507)?,
            ),
            "acoustic-512" => (
                CodecConfig::acoustic(512),
                SamplingParams::new(176, 0.521, 0.375)?,
            ),
            "acoustic-256" => (
                CodecConfig::acoustic(256),
                SamplingParams::new(181, 0.779, 0.351)?,
            ),
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown preset {other:?}; expected one of {}",
                    PRESETS.join(", ")
                )))
            }
        };
        Ok(Self {
            space: SearchSpace::for_codebook(codec.codebook_size),
            codec,
            sampling,
            n_trials: DEFAULT_TRIALS,
            importance_bins: DEFAULT_BINS,
            frame_len: 2048,
            fmin: 0.0,
            fmax: None,
            lm_order: DEFAULT_ORDER,
            lm_alpha: DEFAULT_ALPHA,
            max_len: 200,
            griffin_lim_iterations: duss_core::dsp::DEFAULT_ITERATIONS,
            excluded_styles: Vec::new(),
        })
    }

    pub fn seed(&self) -> u64 {
        self.codec.seed
    }

    /// Analysis front end matching the codec's rate, hop and feature dimension.
    pub fn analysis(&self) -> AnalysisConfig {
        AnalysisConfig {
            sample_rate: self.codec.sample_rate,
            frame_len: self.frame_len,
            hop: self.codec.hop,
            n_mels: self.codec.feature_dim,
            fmin: self.fmin,
            fmax: self.fmax,
            window: WindowKind::Hann,
        }
    }

    /// Sets one key; the error message omits the location.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn parse<T: FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
            value
                .parse()
                .map_err(|_| format!("invalid value {value:?} for {key}"))
        }
        let c = &mut self.codec;
        match key {
            "codebook_size" => c.codebook_size = parse(key, value)?,
            "num_quantizers" => c.num_quantizers = parse(key, value)?,
            "hop" => c.hop = parse(key, value)?,
            "sample_rate" => c.sample_rate = parse(key, value)?,
            "n_mels" => c.feature_dim = parse(key, value)?,
            "commitment_weight" => c.commitment_weight = parse(key, value)?,
            "codebook_weight" => c.codebook_weight = parse(key, value)?,
            "mel_loss_weight" => c.mel_loss_weight = parse(key, value)?,
            "kmeans_iters" => c.kmeans_iters = parse(key, value)?,
            "seed" => c.seed = parse(key, value)?,
            "frame_len" => self.frame_len = parse(key, value)?,
            "fmin" => self.fmin = parse(key, value)?,
            "fmax" => {
                self.fmax = if value == "nyquist" {
                    None
                } else {
                    Some(parse(key, value)?)
                }
            }
            "k" => self.sampling.k = parse(key, value)?,
            "p" => self.sampling.p = parse(key, value)?,
            "temperature" => self.sampling.temperature = parse(key, value)?,
            "k_min" => self.space.k_min = parse(key, value)?,
            "k_max" => self.space.k_max = parse(key, value)?,
            "p_min" => self.space.p_min = parse(key, value)?,
            "p_max" => self.space.p_max = parse(key, value)?,
            "temperature_min" => self.space.temperature_min = parse(key, value)?,
            "temperature_max" => self.space.temperature_max = parse(key, value)?,
            "trials" => self.n_trials = parse(key, value)?,
            "importance_bins" => self.importance_bins = parse(key, value)?,
            "lm_order" => self.lm_order = parse(key, value)?,
            "lm_alpha" => self.lm_alpha = parse(key, value)?,
            "max_len" => self.max_len = parse(key, value)?,
            "griffin_lim_iterations" => self.griffin_lim_iterations = parse(key, value)?,
            "exclude_styles" => {
                self.excluded_styles = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(String::from)
                    .collect()
            }
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.codec.validate()?;
        self.sampling.validate()?;
        self.space.validate()?;
        self.analysis().filterbank()?;
        if self.n_trials == 0 || self.importance_bins == 0 {
            return Err(Error::InvalidParameter(
                "trials and importance_bins must be positive".into(),
            ));
        }
        if self.lm_order == 0 || self.lm_alpha.is_nan() || self.lm_alpha <= 0.0 {
            return Err(Error::InvalidParameter(
                "lm_order must be >= 1 and lm_alpha > 0".into(),
            ));
        }
        if self.max_len == 0 || self.griffin_lim_iterations == 0 {
            return Err(Error::InvalidParameter(
                "max_len and griffin_lim_iterations must be positive".into(),
            ));
        }
        if self.frame_len < self.codec.hop {
            return Err(Error::InvalidParameter(
                "frame_len must be at least hop".into(),
            ));
        }
        Ok(())
    }

    /// Every key with its current value, in `key = value` form.
    pub fn to_text(&self) -> String {
        let c = &self.codec;
        let s = &self.space;
        let mut out = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        line("codebook_size", c.codebook_size.to_string());
        line("num_quantizers", c.num_quantizers.to_string());
        line("hop", c.hop.to_string());
        line("sample_rate", c.sample_rate.to_string());
        line("n_mels", c.feature_dim.to_string());
        line("frame_len", self.frame_len.to_string());
        line("fmin", self.fmin.to_string());
        line(
            "fmax",
            self.fmax
                .map_or_else(|| "nyquist".into(), |f| f.to_string()),
        );
        line("commitment_weight", c.commitment_weight.to_string());
        line("codebook_weight", c.codebook_weight.to_string());
        line("mel_loss_weight", c.mel_loss_weight.to_string());
        line("kmeans_iters", c.kmeans_iters.to_string());
        line("seed", c.seed.to_string());
        line("k", self.sampling.k.to_string());
        line("p", self.sampling.p.to_string());
        line("temperature", self.sampling.temperature.to_string());
        line("k_min", s.k_min.to_string());
        line("k_max", s.k_max.to_string());
        line("p_min", s.p_min.to_string());
        line("p_max", s.p_max.to_string());
        line("temperature_min", s.temperature_min.to_string());
        line("temperature_max", s.temperature_max.to_string());
        line("trials", self.n_trials.to_string());
        line("importance_bins", self.importance_bins.to_string());
        line("lm_order", self.lm_order.to_string());
        line("lm_alpha", self.lm_alpha.to_string());
        line("max_len", self.max_len.to_string());
        line(
            "griffin_lim_iterations",
            self.griffin_lim_iterations.to_string(),
        );
        line("exclude_styles", self.excluded_styles.join(","));
        out
    }
}

/// `(line, key, value)` triples of a config file; `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Config {
                line: i + 1,
                message: format!("expected key = value, got {line:?}"),
            });
        };
        entries.push((i + 1, key.trim().to_string(), value.trim().to_string()));
    }
    Ok(entries)
}

/// Inputs to [`resolve`], highest precedence last.
#[derive(Debug, Clone, Default)]
pub struct Sources<'a> {
    pub file_text: Option<&'a str>,
    pub preset: Option<&'a str>,
    /// `--set` pairs followed by per-command flags.
    pub overrides: Vec<(String, String)>,
    pub seed_flag: Option<u64>,
    pub env_seed: Option<&'a str>,
}

pub fn resolve(sources: &Sources<'_>) -> Result<PipelineConfig> {
    let file = match sources.file_text {
        Some(text) => parse_config_text(text)?,
        None => Vec::new(),
    };
    let file_preset = file.iter().find(|(_, k, _)| k == "preset");
    let mut config = match (sources.preset, file_preset) {
        (Some(name), _) => PipelineConfig::preset(name)?,
        (None, Some((line, _, name))) => {
            PipelineConfig::preset(name).map_err(|e| Error::Config {
                line: *line,
                message: e.to_string(),
            })?
        }
        (None, None) => PipelineConfig::default(),
    };
    let mut seed_in_file = false;
    for (line, key, value) in &file {
        if key == "preset" {
            continue;
        }
        seed_in_file |= key == "seed";
        config.set(key, value).map_err(|message| Error::Config {
            line: *line,
            message,
        })?;
    }
    for (key, value) in &sources.overrides {
        if key == "seed" {
            seed_in_file = true;
        }
        config
            .set(key, value)
            .map_err(|m| Error::InvalidParameter(format!("--set {key}={value}: {m}")))?;
    }
    if let Some(seed) = sources.seed_flag {
        config.codec.seed = seed;
    } else if !seed_in_file {
        if let Some(env) = sources.env_seed {
            config.codec.seed = env.trim().parse().map_err(|_| {
                Error::InvalidParameter(format!(
                    "DUSS_SEED must be an unsigned integer, got {env:?}"
                ))
            })?;
        }
    }
    config.validate()?;
    Ok(config)
}

/// Splits `KEY=VALUE`.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| Error::InvalidParameter(format!("expected KEY=VALUE, got {s:?}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_vocoder_preset() {
        let c = PipelineConfig::default();
        assert_eq!(c.codec, CodecConfig::vocoder_16k());
        assert_eq!(c.analysis().hop, 480);
        assert_eq!(c.analysis().n_mels, 80);
        c.validate().unwrap();
    }

    #[test]
    fn acoustic_presets_carry_reported_triples() {
        let c = PipelineConfig::preset("acoustic-256").unwrap();
        assert_eq!(c.codec.num_quantizers, 1);
        assert_eq!(c.codec.codebook_size, 256);
        assert_eq!(
            (c.sampling.k, c.sampling.p, c.sampling.temperature),
            (181, 0.779, 0.351)
        );
        assert_eq!((c.space.k_min, c.space.k_max), (5, 200));
        assert!(PipelineConfig::preset("acoustic-2048").is_err());
    }

    #[test]
    fn precedence_flags_over_file_over_defaults() {
        let text = "# experiment\npreset = acoustic-512\nk = 7 # inline\np=0.5\nseed = 3\n";
        let sources = Sources {
            file_text: Some(text),
            overrides: vec![("p".into(), "0.25".into())],
            env_seed: Some("99"),
            ..Default::default()
        };
        let c = resolve(&sources).unwrap();
        assert_eq!(c.codec.codebook_size, 512);
        assert_eq!(c.sampling.k, 7);
        assert_eq!(c.sampling.p, 0.25);
        assert_eq!(c.sampling.temperature, 0.375);
        assert_eq!(c.seed(), 3);
        let flagged = resolve(&Sources {
            seed_flag: Some(5),
            preset: Some("acoustic-1024"),
            ..sources.clone()
        })
        .unwrap();
        assert_eq!(flagged.seed(), 5);
        assert_eq!(flagged.codec.codebook_size, 1024);
    }

    #[test]
    fn env_seed_is_a_fallback() {
        let c = resolve(&Sources {
            env_seed: Some("42"),
            ..Default::default()
        })
        .unwrap();
        assert_eq!(c.seed(), 42);
        assert!(resolve(&Sources {
            env_seed: Some("x"),
            ..Default::default()
        })
        .is_err());
    }

    #[test]
    fn errors_carry_line_numbers() {
        for (text, line) in [
            ("k = 3\nnonsense\n", 2),
            ("\n\nbogus = 1\n", 3),
            ("k = many\n", 1),
        ] {
            match resolve(&Sources {
                file_text: Some(text),
                ..Default::default()
            }) {
                Err(Error::Config { line: l, .. }) => assert_eq!(l, line),
                other => panic!("{other:?}"),
            }
        }
        assert!(resolve(&Sources {
            overrides: vec![("p".into(), "0".into())],
            ..Default::default()
        })
        .is_err());
    }

    #[test]
    fn text_round_trip() {
        let mut c = PipelineConfig::preset("acoustic-512").unwrap();
        c.excluded_styles = vec!["whisper".into(), "laughing".into()];
        c.fmax = Some(7600.0);
        let text = c.to_text();
        let back = resolve(&Sources {
            file_text: Some(&text),
            ..Default::default()
        })
        .unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn override_syntax() {
        assert_eq!(parse_override("k = 4").unwrap(), ("k".into(), "4".into()));
        assert!(parse_override("k4").is_err());
    }
}
