//! Cross-module round trips through files, as the command line uses them.

use duss_core::codec::{decode, encode, train_codebooks, CodecConfig, RvqCodec, TokenSequence};
use duss_core::corpus::{
    load_manifest, synthesize_corpus, write_synthetic_corpus, Split, SynthSpec,
};
use duss_core::dsp::wav::read_wav;
use duss_core::dsp::{griffin_lim, log_mel, AnalysisConfig, FeatureMatrix};
use duss_core::metrics::{
    evaluate_pair, measured_bitrate, BitrateOptions, EvaluationConfig, MetricReport,
};
use duss_core::sampler::{generate, stream_rng, SamplingParams};
use duss_core::toylm::{train_ngram, NgramModel};
use duss_core::tuner::{param_importance, tune, DevContext, ScoringInput, SearchSpace};

fn small_codec() -> CodecConfig {
    CodecConfig {
        codebook_size: 16,
        num_quantizers: 1,
        hop: 160,
        feature_dim: 20,
        kmeans_iters: 15,
        seed: 3,
        ..CodecConfig::vocoder_16k()
    }
}

fn analysis(config: &CodecConfig) -> AnalysisConfig {
    AnalysisConfig {
        hop: config.hop,
        n_mels: config.feature_dim,
        ..AnalysisConfig::new(config.sample_rate)
    }
}

fn corpus_features(config: &CodecConfig) -> Vec<FeatureMatrix> {
    let spec = SynthSpec {
        n_utterances: 8,
        seed: 5,
        ..SynthSpec::default()
    };
    synthesize_corpus(&spec)
        .unwrap()
        .iter()
        .map(|u| log_mel(&u.waveform, &analysis(config)).unwrap())
        .collect()
}

#[test]
fn written_corpus_trains_and_round_trips_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SynthSpec {
        n_utterances: 10,
        seed: 9,
        ..SynthSpec::default()
    };
    write_synthetic_corpus(dir.path(), &spec).unwrap();
    let loaded = load_manifest(dir.path().join("manifest.jsonl")).unwrap();
    assert!(loaded.warnings.is_empty());
    let train = loaded.manifest.split(Split::Train);
    assert_eq!(train.len(), 8);

    let config = small_codec();
    let features: Vec<FeatureMatrix> = train
        .entries
        .iter()
        .map(|e| log_mel(&read_wav(train.audio_path(e)).unwrap(), &analysis(&config)).unwrap())
        .collect();
    let codec = train_codebooks(&features, &config).unwrap();
    let codec_path = dir.path().join("codec.duss");
    codec.save(&codec_path).unwrap();
    let reloaded = RvqCodec::load(&codec_path).unwrap();
    assert_eq!(reloaded.stages(), codec.stages());

    let tokens = encode(&reloaded, &features[0]).unwrap();
    let token_path = dir.path().join("t.dust");
    tokens.save(&token_path).unwrap();
    let tokens_back = TokenSequence::load(&token_path).unwrap();
    assert_eq!(tokens_back, tokens);
    assert_eq!(tokens_back.len(), features[0].n_frames());

    let decoded = decode(&reloaded, &tokens_back).unwrap();
    let audio = griffin_lim(&decoded, &analysis(&config), 20).unwrap();
    assert_eq!(audio.sample_rate(), config.sample_rate);
    assert!(audio.samples().iter().all(|s| s.is_finite()));
}

#[test]
fn token_model_survives_serialization_and_generates_identically() {
    let config = small_codec();
    let features = corpus_features(&config);
    let codec = train_codebooks(&features, &config).unwrap();
    let sequences: Vec<TokenSequence> = features
        .iter()
        .map(|f| encode(&codec, f).unwrap())
        .collect();
    let rate = config.frame_rate().unwrap();
    let lm = train_ngram(&sequences, 16, rate, 3, 0.1).unwrap();
    let back = NgramModel::from_bytes(&lm.to_bytes()).unwrap();
    let params = SamplingParams::new(11, 0.186, 0.507).unwrap();
    let a = generate(&lm, &params, 60, &mut stream_rng(1, 0)).unwrap();
    let b = generate(&back, &params, 60, &mut stream_rng(1, 0)).unwrap();
    assert_eq!(a, b);
    assert!(a.tokens.stream(0).iter().all(|&t| t < 16));
    assert_eq!(a.tokens.frame_rate(), rate);
}

#[test]
fn measured_bitrate_of_encodings_is_bounded_by_vocabulary_plus_stop() {
    let config = small_codec();
    let features = corpus_features(&config);
    let codec = train_codebooks(&features, &config).unwrap();
    let sequences: Vec<TokenSequence> = features
        .iter()
        .map(|f| encode(&codec, f).unwrap())
        .collect();
    let durations: Vec<f64> = sequences
        .iter()
        .map(TokenSequence::duration_seconds)
        .collect();
    let bps = measured_bitrate(&sequences, &durations, BitrateOptions::default()).unwrap();
    let frames: usize = sequences.iter().map(TokenSequence::len).sum();
    let symbols = (frames + sequences.len()) as f64;
    let seconds: f64 = durations.iter().sum();
    assert!(bps > 0.0);
    assert!(bps <= symbols * 17f64.log2() / seconds + 1e-9);
}

#[test]
fn constant_scorer_tuning_has_zero_importance_and_first_best() {
    let config = small_codec();
    let features = corpus_features(&config);
    let codec = train_codebooks(&features, &config).unwrap();
    let sequences: Vec<TokenSequence> = features
        .iter()
        .map(|f| encode(&codec, f).unwrap())
        .collect();
    let lm = train_ngram(&sequences, 16, config.frame_rate().unwrap(), 2, 0.1).unwrap();
    let contexts = [DevContext {
        prompt: Vec::new(),
        max_len: 10,
    }];
    let history = tune(
        &SearchSpace::for_codebook(16),
        &|_: &ScoringInput<'_>| 1.0,
        &lm,
        &contexts,
        40,
        4,
    )
    .unwrap();
    assert_eq!(history.best_trial().index, 0);
    let importance = param_importance(&history, 10).unwrap();
    assert_eq!(
        (importance.k, importance.p, importance.temperature),
        (0.0, 0.0, 0.0)
    );
    let lines: Vec<serde_json::Value> = history
        .to_jsonl()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 40);
    assert_eq!(lines[7]["index"], 7);
}

#[test]
fn self_evaluation_report_is_zero() {
    let spec = SynthSpec {
        n_utterances: 3,
        seed: 2,
        ..SynthSpec::default()
    };
    let config = EvaluationConfig::new(16000);
    let rows = synthesize_corpus(&spec)
        .unwrap()
        .iter()
        .map(|u| evaluate_pair(u.entry.id.clone(), &u.waveform, &u.waveform, &config).unwrap())
        .collect();
    let report = MetricReport::from_utterances(rows, None).unwrap();
    assert_eq!(report.mcd_db, 0.0);
    assert_eq!(report.log_f0_rmse, 0.0);
    assert!(report.to_table().contains("MCD"));
}
