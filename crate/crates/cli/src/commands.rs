//! Subcommand implementations.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use duss_core::codec::{
    decode, encode, quantization_report, train_codebooks, CodecConfig, RvqCodec, TokenSequence,
};
use duss_core::corpus::{
    filter_by_score, filter_styles, load_manifest, write_score_csv, write_synthetic_corpus,
    CorpusManifest, LevelScorer, Split, SynthSpec, UtteranceScorer, VoicingScorer,
};
use duss_core::dsp::wav::{read_wav, write_wav, WavFormat};
use duss_core::dsp::{
    griffin_lim, log_mel, resample, AnalysisConfig, F0Config, FeatureMatrix, Waveform,
};
use duss_core::metrics::{
    evaluate_pair, measured_bitrate, nominal_bitrate, BitrateOptions, EvaluationConfig,
    MetricReport,
};
use duss_core::sampler::{generate, stream_rng, LogitSource, SamplingParams, Termination};
use duss_core::toylm::{train_ngram, NgramModel};
use duss_core::tuner::{
    param_importance, tune, CentroidDistortionScorer, DevContext, ScoringInput,
};
use duss_core::{Error, Result};
use rayon::prelude::*;
use serde_json::json;

use crate::args::*;
use crate::config::PipelineConfig;

/// Where a command reports progress and warnings.
pub struct Io<'a> {
    pub out: &'a mut dyn Write,
    pub err: &'a mut dyn Write,
}

impl Io<'_> {
    fn say(&mut self, line: impl AsRef<str>) -> Result<()> {
        writeln!(self.out, "{}", line.as_ref())?;
        Ok(())
    }

    fn warn(&mut self, message: impl AsRef<str>) -> Result<()> {
        writeln!(
            self.err,
            "{}",
            json!({"level": "warning", "message": message.as_ref()})
        )?;
        Ok(())
    }
}

/// The separable objective `−(τ − 0.4)² − 0.1(p − 0.5)² − 0.001(k − 50)²`.
pub fn separable_objective(params: &SamplingParams) -> f64 {
    -(params.temperature - 0.4).powi(2)
        - 0.1 * (params.p - 0.5).powi(2)
        - 0.001 * (params.k as f64 - 50.0).powi(2)
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::from(e).at_path(path))
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::from(e).at_path(path))
}

/// Analysis front end for a trained codec: its rate, hop and dimension with
/// the pipeline's window settings.
fn analysis_for(codec: &CodecConfig, config: &PipelineConfig) -> AnalysisConfig {
    AnalysisConfig {
        sample_rate: codec.sample_rate,
        hop: codec.hop,
        n_mels: codec.feature_dim,
        ..config.analysis()
    }
}

fn features_of(audio: &Waveform, analysis: &AnalysisConfig) -> Result<FeatureMatrix> {
    log_mel(&resample(audio, analysis.sample_rate)?, analysis)
}

fn load_features(
    manifest: &CorpusManifest,
    analysis: &AnalysisConfig,
) -> Result<Vec<FeatureMatrix>> {
    manifest
        .entries
        .par_iter()
        .map(|e| {
            let path = manifest.audio_path(e);
            features_of(&read_wav(&path)?, analysis)
        })
        .collect()
}

/// Train split of `path` with the configured and flagged styles removed.
fn training_manifest(
    path: &Path,
    config: &PipelineConfig,
    extra: &[String],
    io: &mut Io<'_>,
) -> Result<(CorpusManifest, serde_json::Value)> {
    let loaded = load_manifest(path)?;
    for w in &loaded.warnings {
        io.warn(w)?;
    }
    let excluded: BTreeSet<String> = config
        .excluded_styles
        .iter()
        .chain(extra)
        .cloned()
        .collect();
    let (train, summary) = filter_styles(&loaded.manifest.split(Split::Train), &excluded);
    if train.is_empty() {
        return Err(Error::Empty(format!(
            "training set: no train-split utterances in {} remain after excluding {:?}",
            path.display(),
            excluded
        )));
    }
    Ok((train, json!(summary.removed)))
}

fn concat(features: &[FeatureMatrix]) -> Result<FeatureMatrix> {
    let first = &features[0];
    let data: Vec<f64> = features
        .iter()
        .flat_map(|f| f.data().iter().copied())
        .collect();
    let frames = features.iter().map(FeatureMatrix::n_frames).sum();
    FeatureMatrix::new(data, frames, first.dim(), first.frame_rate(), first.kind())
}

pub fn synth_corpus(a: &SynthCorpusArgs, config: &PipelineConfig, io: &mut Io<'_>) -> Result<()> {
    let spec = SynthSpec {
        n_utterances: a.count,
        sample_rate: a.sample_rate.unwrap_or(config.codec.sample_rate),
        seed: config.seed(),
        ..SynthSpec::default()
    };
    let manifest = write_synthetic_corpus(&a.out_dir, &spec)?;
    io.say(format!(
        "wrote {} utterances to {}",
        manifest.len(),
        a.out_dir.join("manifest.jsonl").display()
    ))
}

pub fn train_codec(a: &TrainCodecArgs, config: &PipelineConfig, io: &mut Io<'_>) -> Result<()> {
    let (train, removed) = training_manifest(&a.manifest, config, &a.exclude_style, io)?;
    let features = load_features(&train, &config.analysis())?;
    let codec = train_codebooks(&features, &config.codec)?;
    codec.save(&a.out)?;
    let all = concat(&features)?;
    let report = quantization_report(&codec, &all)?;
    let c = codec.config();
    io.say(format!(
        "trained codec V={} Q={} on {} utterances, {} frames at {}",
        c.codebook_size,
        c.num_quantizers,
        train.len(),
        all.n_frames(),
        c.frame_rate()?
    ))?;
    for (s, mse) in codec.stage_mse().iter().enumerate() {
        io.say(format!("stage {} mse {mse:.6}", s + 1))?;
    }
    io.say(format!(
        "commitment {:.6} codebook {:.6} weighted total {:.6} (weights {} / {})",
        report.commitment,
        report.codebook,
        report.weighted_total,
        report.commitment_weight,
        report.codebook_weight
    ))?;
    if let Some(path) = &a.report {
        write_json(
            path,
            &json!({
                "utterances": train.len(),
                "frames": all.n_frames(),
                "excluded": removed,
                "stage_mse": codec.stage_mse(),
                "quantization": report,
            }),
        )?;
    }
    Ok(())
}

pub fn encode_cmd(a: &EncodeArgs, config: &PipelineConfig, io: &mut Io<'_>) -> Result<()> {
    let codec = RvqCodec::load(&a.codec)?;
    let analysis = analysis_for(codec.config(), config);
    let audio = read_wav(&a.input)?;
    let tokens = encode(&codec, &features_of(&audio, &analysis)?)?;
    tokens.save(&a.out)?;
    io.say(format!(
        "encoded {} frames x {} streams, nominal {:.2} bps",
        tokens.len(),
        tokens.num_quantizers(),
        nominal_bitrate(
            codec.codebook_size(),
            codec.num_quantizers(),
            tokens.frame_rate()
        )?
    ))
}

/// Metric front end at the codec's rate and hop, independent of its feature size.
fn evaluation_config(sample_rate: u32, hop: usize) -> EvaluationConfig {
    let mut eval = EvaluationConfig::new(sample_rate);
    eval.analysis.hop = hop;
    eval.f0.hop = hop;
    eval
}

fn render(codec: &RvqCodec, tokens: &TokenSequence, config: &PipelineConfig) -> Result<Waveform> {
    let features = decode(codec, tokens)?;
    griffin_lim(
        &features,
        &analysis_for(codec.config(), config),
        config.griffin_lim_iterations,
    )
}

pub fn decode_cmd(a: &DecodeArgs, config: &PipelineConfig, io: &mut Io<'_>) -> Result<()> {
    let codec = RvqCodec::load(&a.codec)?;
    let tokens = TokenSequence::load(&a.tokens)?;
    let audio = render(&codec, &tokens, config).map_err(|e| e.at_path(&a.tokens))?;
    let format = if a.float {
        WavFormat::Float32
    } else {
        WavFormat::Pcm16
    };
    write_wav(&a.out, &audio, format)?;
    io.say(format!(
        "decoded {} frames to {} samples",
        tokens.len(),
        audio.len()
    ))?;
    if let Some(reference) = &a.reference {
        if audio.is_empty() {
            return io.say("mcd n/a (empty reconstruction)");
        }
        let eval = evaluation_config(codec.config().sample_rate, codec.config().hop);
        let m = evaluate_pair("reference", &read_wav(reference)?, &audio, &eval)?;
        io.say(format!(
            "mcd {:.3} dB, log-f0 rmse {:.4}",
            m.mcd_db, m.log_f0_rmse
        ))?;
    }
    Ok(())
}

fn single_stream(codec: &RvqCodec) -> Result<()> {
    if codec.num_quantizers() != 1 {
        return Err(Error::VocabularyMismatch {
            expected: "single-quantizer codec for token modelling".into(),
            actual: format!("{} quantizers", codec.num_quantizers()),
        });
    }
    Ok(())
}

pub fn train_lm(a: &TrainLmArgs, config: &PipelineConfig, io: &mut Io<'_>) -> Result<()> {
    let codec = RvqCodec::load(&a.codec)?;
    single_stream(&codec)?;
    let (train, _) = training_manifest(&a.manifest, config, &a.exclude_style, io)?;
    let features = load_features(&train, &analysis_for(codec.config(), config))?;
    let corpus = features
        .iter()
        .map(|f| encode(&codec, f))
        .collect::<Result<Vec<_>>>()?;
    let rate = codec.config().frame_rate()?;
    let model = train_ngram(
        &corpus,
        codec.codebook_size() as u32,
        rate,
        config.lm_order,
        config.lm_alpha,
    )?;
    model.save(&a.out)?;
    let tokens: usize = corpus.iter().map(TokenSequence::len).sum();
    io.say(format!(
        "trained order-{} model on {} utterances, {} tokens, {} contexts",
        model.order(),
        corpus.len(),
        tokens,
        model.num_contexts()
    ))
}

fn compatible(lm: &NgramModel, codec: &RvqCodec) -> Result<()> {
    single_stream(codec)?;
    if lm.codebook_size() as usize != codec.codebook_size() {
        return Err(Error::VocabularyMismatch {
            expected: format!("codebook size {}", codec.codebook_size()),
            actual: format!("token model over {} codes", lm.codebook_size()),
        });
    }
    let rate = codec.config().frame_rate()?;
    if lm.frame_rate() != rate {
        return Err(Error::FrameRateMismatch {
            expected: rate.to_string(),
            actual: lm.frame_rate().to_string(),
        });
    }
    Ok(())
}

pub fn generate_cmd(a: &GenerateArgs, config: &PipelineConfig, io: &mut Io<'_>) -> Result<()> {
    let lm = NgramModel::load(&a.lm)?;
    let codec = RvqCodec::load(&a.codec)?;
    compatible(&lm, &codec)?;
    create_dir(&a.out_dir)?;
    let params = config.sampling;
    let mut rows = Vec::new();
    let mut nonempty = Vec::new();
    for i in 0..a.count {
        let mut rng = stream_rng(config.seed(), i as u64);
        let g = generate(&lm, &params, config.max_len, &mut rng)?;
        let stem = format!("gen_{i:03}");
        g.tokens.save(a.out_dir.join(format!("{stem}.dust")))?;
        let audio = render(&codec, &g.tokens, config)?;
        write_wav(
            a.out_dir.join(format!("{stem}.wav")),
            &audio,
            WavFormat::Pcm16,
        )?;
        let truncated = g.termination == Termination::Truncated;
        io.say(format!(
            "{stem}: {} tokens, {}",
            g.tokens.len(),
            if truncated { "truncated" } else { "stopped" }
        ))?;
        rows.push(json!({"index": i, "tokens": g.tokens.len(), "truncated": truncated}));
        if !g.tokens.is_empty() {
            nonempty.push(g.tokens);
        }
    }
    let bitrate = if nonempty.is_empty() {
        None
    } else {
        let durations: Vec<f64> = nonempty
            .iter()
            .map(TokenSequence::duration_seconds)
            .collect();
        Some(measured_bitrate(
            &nonempty,
            &durations,
            BitrateOptions::default(),
        )?)
    };
    match bitrate {
        Some(b) => io.say(format!("measured bitrate {b:.2} bps"))?,
        None => io.say("measured bitrate n/a (all generations empty)")?,
    }
    write_json(
        &a.out_dir.join("summary.json"),
        &json!({
            "k": params.k,
            "p": params.p,
            "temperature": params.temperature,
            "seed": config.seed(),
            "max_len": config.max_len,
            "measured_bitrate_bps": bitrate,
            "generations": rows,
        }),
    )
}

pub fn tune_cmd(a: &TuneArgs, config: &PipelineConfig, io: &mut Io<'_>) -> Result<()> {
    let lm = NgramModel::load(&a.lm)?;
    let codec = RvqCodec::load(&a.codec)?;
    compatible(&lm, &codec)?;
    let contexts = vec![
        DevContext {
            prompt: Vec::new(),
            max_len: config.max_len,
        };
        a.contexts
    ];
    let seed = config.seed();
    let history = match a.scorer {
        TuneScorer::Centroid => {
            let scorer = CentroidDistortionScorer::new(codec.clone());
            tune(
                &config.space,
                &scorer,
                &lm,
                &contexts,
                config.n_trials,
                seed,
            )?
        }
        TuneScorer::Synthetic => {
            let scorer = |i: &ScoringInput<'_>| separable_objective(i.params);
            tune(
                &config.space,
                &scorer,
                &lm,
                &contexts,
                config.n_trials,
                seed,
            )?
        }
        TuneScorer::Constant => tune(
            &config.space,
            &|_: &ScoringInput<'_>| 1.0,
            &lm,
            &contexts,
            config.n_trials,
            seed,
        )?,
    };
    history.write_jsonl(&a.history)?;
    let best = history.best_trial();
    io.say(format!(
        "{:<14} {:>5} {:>7} {:>12}",
        "codebook size", "k", "p", "temperature"
    ))?;
    io.say(format!(
        "{:<14} {:>5} {:>7.3} {:>12.3}",
        codec.codebook_size(),
        best.params.k,
        best.params.p,
        best.params.temperature
    ))?;
    io.say(format!("best trial {} score {:.6}", best.index, best.score))?;
    let importance = match param_importance(&history, config.importance_bins) {
        Ok(imp) => {
            io.say(format!(
                "importance k {:.3} p {:.3} temperature {:.3}",
                imp.k, imp.p, imp.temperature
            ))?;
            Some(imp)
        }
        Err(e @ Error::TooFewTrials { .. }) => {
            io.warn(format!("importance not computed: {e}"))?;
            None
        }
        Err(e) => return Err(e),
    };
    if let Some(path) = &a.summary {
        write_json(
            path,
            &json!({
                "codebook_size": codec.codebook_size(),
                "trials": history.trials.len(),
                "best": {
                    "index": best.index,
                    "k": best.params.k,
                    "p": best.params.p,
                    "temperature": best.params.temperature,
                    "score": best.score,
                },
                "importance": importance,
            }),
        )?;
    }
    Ok(())
}

pub fn evaluate_cmd(a: &EvaluateArgs, config: &PipelineConfig, io: &mut Io<'_>) -> Result<()> {
    let reference = load_manifest(&a.reference)?;
    let synthesized = load_manifest(&a.synthesized)?;
    for w in reference.warnings.iter().chain(&synthesized.warnings) {
        io.warn(w)?;
    }
    let (reference, synthesized) = (reference.manifest, synthesized.manifest);
    let pairs = reference
        .entries
        .iter()
        .map(|r| {
            synthesized
                .entries
                .iter()
                .find(|s| s.id == r.id)
                .map(|s| (r, s))
                .ok_or_else(|| Error::Format {
                    what: "evaluation pairing",
                    message: format!(
                        "utterance {:?} is missing from {}",
                        r.id,
                        a.synthesized.display()
                    ),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    if pairs.is_empty() {
        return Err(Error::Empty("evaluation set".into()));
    }
    let eval = evaluation_config(config.codec.sample_rate, config.codec.hop);
    let audio = pairs
        .par_iter()
        .map(|(r, s)| {
            Ok((
                read_wav(reference.audio_path(r))?,
                read_wav(synthesized.audio_path(s))?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let rows = pairs
        .par_iter()
        .zip(&audio)
        .map(|((r, _), (ra, sa))| evaluate_pair(r.id.clone(), ra, sa, &eval))
        .collect::<Result<Vec<_>>>()?;
    let bitrate = match &a.codec {
        Some(path) => {
            let codec = RvqCodec::load(path)?;
            let analysis = analysis_for(codec.config(), config);
            let seqs = audio
                .iter()
                .map(|(_, s)| encode(&codec, &features_of(s, &analysis)?))
                .collect::<Result<Vec<_>>>()?;
            let durations: Vec<f64> = audio.iter().map(|(_, s)| s.duration_seconds()).collect();
            Some(measured_bitrate(
                &seqs,
                &durations,
                BitrateOptions::default(),
            )?)
        }
        None => None,
    };
    let report = MetricReport::from_utterances(rows, bitrate)?;
    write_json(&a.out, &serde_json::to_value(&report)?)?;
    let table = report.to_table();
    if let Some(path) = &a.table {
        std::fs::write(path, &table).map_err(|e| Error::from(e).at_path(path))?;
    }
    io.say(format!("{} utterances", report.utterances))?;
    io.say(table.trim_end())
}

pub fn corpus_filter(a: &CorpusFilterArgs, config: &PipelineConfig, io: &mut Io<'_>) -> Result<()> {
    let loaded = load_manifest(&a.manifest)?;
    for w in &loaded.warnings {
        io.warn(w)?;
    }
    let excluded: BTreeSet<String> = config
        .excluded_styles
        .iter()
        .chain(&a.exclude_style)
        .cloned()
        .collect();
    let (mut manifest, summary) = filter_styles(&loaded.manifest, &excluded);
    for (tag, n) in &summary.removed {
        io.say(format!("excluded style {tag}: {n} removed"))?;
    }
    if let (Some(kind), Some(threshold)) = (a.scorer, a.threshold) {
        let voicing = VoicingScorer {
            f0: F0Config {
                hop: config.codec.hop,
                ..F0Config::default()
            },
        };
        let scorer: &dyn UtteranceScorer = match kind {
            FilterScorer::Level => &LevelScorer,
            FilterScorer::Voicing => &voicing,
        };
        let outcome = filter_by_score(&manifest, scorer, threshold);
        for w in &outcome.warnings {
            io.warn(w)?;
        }
        if let Some(path) = &a.scores_csv {
            write_score_csv(path, &outcome.scores)?;
        }
        io.say(format!(
            "score >= {threshold}: kept {} of {}",
            outcome.manifest.len(),
            manifest.len()
        ))?;
        manifest = outcome.manifest;
    }
    manifest.save(&a.out)?;
    io.say(format!(
        "kept {} of {} utterances",
        manifest.len(),
        loaded.manifest.len()
    ))
}

pub fn show_config(config: &PipelineConfig, io: &mut Io<'_>) -> Result<()> {
    write!(io.out, "{}", config.to_text())?;
    Ok(())
}
