use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::kmeans::{
    extend_plus_plus, kmeans_plus_plus, lloyd, lloyd_pinned, nearest, squared_distance,
};
use super::tokens::TokenSequence;
use super::CodecConfig;
use crate::container::{
    put_f64, put_u32, put_u64, read_file, write_file, ByteReader, ContainerKind, Header,
};
use crate::dsp::{check_finite, FeatureKind, FeatureMatrix};
use crate::error::{Error, Result};

/// One quantizer stage: `size × dim` code vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    vectors: Vec<f64>,
    dim: usize,
    usage_counts: Vec<u64>,
}

impl Codebook {
    pub fn new(vectors: Vec<f64>, dim: usize, usage_counts: Vec<u64>) -> Result<Self> {
        if dim == 0
            || !vectors.len().is_multiple_of(dim)
            || vectors.len() / dim != usage_counts.len()
        {
            return Err(Error::invalid(format!(
                "codebook of {} values, dimension {dim} and {} usage counts is inconsistent",
                vectors.len(),
                usage_counts.len()
            )));
        }
        check_finite(&vectors)?;
        Ok(Self {
            vectors,
            dim,
            usage_counts,
        })
    }

    pub fn size(&self) -> usize {
        self.usage_counts.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vector(&self, j: usize) -> &[f64] {
        &self.vectors[j * self.dim..(j + 1) * self.dim]
    }

    pub fn vectors(&self) -> &[f64] {
        &self.vectors
    }

    /// Frames assigned to each code in the final k-means assignment.
    pub fn usage_counts(&self) -> &[u64] {
        &self.usage_counts
    }

    pub fn nearest(&self, x: &[f64]) -> (usize, f64) {
        nearest(&self.vectors, self.dim, x)
    }
}

/// A trained residual vector quantizer.
#[derive(Debug, Clone, PartialEq)]
pub struct RvqCodec {
    config: CodecConfig,
    stages: Vec<Codebook>,
    stage_mse: Vec<f64>,
}

impl RvqCodec {
    pub fn new(config: CodecConfig, stages: Vec<Codebook>, stage_mse: Vec<f64>) -> Result<Self> {
        config.validate()?;
        if stages.len() != config.num_quantizers || stage_mse.len() != stages.len() {
            return Err(Error::invalid(format!(
                "{} stages and {} stage errors for {} quantizers",
                stages.len(),
                stage_mse.len(),
                config.num_quantizers
            )));
        }
        for stage in &stages {
            if stage.dim() != config.feature_dim {
                return Err(Error::DimensionMismatch {
                    expected: config.feature_dim,
                    actual: stage.dim(),
                });
            }
            if stage.size() != config.codebook_size {
                return Err(Error::invalid(format!(
                    "stage has {} codes, config says {}",
                    stage.size(),
                    config.codebook_size
                )));
            }
        }
        Ok(Self {
            config,
            stages,
            stage_mse,
        })
    }

    pub fn config(&self) -> &CodecConfig {
        &self.config
    }

    pub fn stages(&self) -> &[Codebook] {
        &self.stages
    }

    /// Mean squared residual norm on the training frames after each stage.
    pub fn stage_mse(&self) -> &[f64] {
        &self.stage_mse
    }

    pub fn codebook_size(&self) -> usize {
        self.config.codebook_size
    }

    pub fn num_quantizers(&self) -> usize {
        self.config.num_quantizers
    }

    pub fn dim(&self) -> usize {
        self.config.feature_dim
    }

    /// Quantizes one frame, writing one token per stage, and returns the
    /// final residual.
    fn quantize_frame(&self, frame: &[f64], tokens: &mut [u32]) -> Vec<f64> {
        quantize(&self.stages, frame, tokens)
    }

    /// Serializes into a "DUSS" container of kind codec.
    ///
    /// Header rows are `Q·V`, columns `D`, rate `sample_rate / hop`. The
    /// payload holds u32 `V`, `Q`, hop, sample rate, `D`, k-means iterations,
    /// u64 seed, f64 commitment, codebook and mel-loss weights; then the
    /// `Q·V·D` code vectors stage by stage, `Q·V` u64 usage counts and `Q`
    /// f64 per-stage training errors.
    pub fn to_bytes(&self) -> Vec<u8> {
        let c = &self.config;
        let mut out = Vec::new();
        Header {
            kind: ContainerKind::Codec,
            rows: (c.num_quantizers * c.codebook_size) as u64,
            cols: c.feature_dim as u64,
            rate: c.frame_rate().expect("validated config"),
        }
        .write(&mut out);
        for v in [c.codebook_size, c.num_quantizers, c.hop] {
            put_u32(&mut out, v as u32);
        }
        put_u32(&mut out, c.sample_rate);
        put_u32(&mut out, c.feature_dim as u32);
        put_u32(&mut out, c.kmeans_iters as u32);
        put_u64(&mut out, c.seed);
        for w in [c.commitment_weight, c.codebook_weight, c.mel_loss_weight] {
            put_f64(&mut out, w);
        }
        for stage in &self.stages {
            stage.vectors.iter().for_each(|&v| put_f64(&mut out, v));
        }
        for stage in &self.stages {
            stage
                .usage_counts
                .iter()
                .for_each(|&n| put_u64(&mut out, n));
        }
        self.stage_mse.iter().for_each(|&e| put_f64(&mut out, e));
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(bytes);
        let header = Header::read(&mut r)?;
        header.expect(ContainerKind::Codec)?;
        let config = CodecConfig {
            codebook_size: r.u32()? as usize,
            num_quantizers: r.u32()? as usize,
            hop: r.u32()? as usize,
            sample_rate: r.u32()?,
            feature_dim: r.u32()? as usize,
            kmeans_iters: r.u32()? as usize,
            seed: r.u64()?,
            commitment_weight: r.f64()?,
            codebook_weight: r.f64()?,
            mel_loss_weight: r.f64()?,
        };
        config
            .validate()
            .map_err(|e| Error::format("codec", e.to_string()))?;
        let (v, q, d) = (
            config.codebook_size,
            config.num_quantizers,
            config.feature_dim,
        );
        if header.rows != (q * v) as u64 || header.cols != d as u64 {
            return Err(Error::format(
                "codec",
                format!(
                    "header shape {}x{} disagrees with config {}x{d}",
                    header.rows,
                    header.cols,
                    q * v
                ),
            ));
        }
        let mut vectors = Vec::with_capacity(q);
        for _ in 0..q {
            vectors.push(r.f64s((v * d) as u64)?);
        }
        let mut stages = Vec::with_capacity(q);
        for vecs in vectors {
            let counts = (0..v).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
            stages.push(Codebook::new(vecs, d, counts)?);
        }
        let stage_mse = r.f64s(q as u64)?;
        r.finish()?;
        Self::new(config, stages, stage_mse)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_file(path.as_ref(), &self.to_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_bytes(&read_file(path)?).map_err(|e| e.at_path(path))
    }
}

/// Residual quantization of one frame over `stages`.
///
/// Stage 0 takes the nearest code. Every later stage takes the nearest
/// *admissible* code: one after which re-encoding the reconstruction
/// `Σ c_v[t_v]` reproduces every earlier token. Usually that is simply the
/// nearest code; when it is not, the scan continues in order of distance.
/// Trained codecs pin code 0 of stages after the first at the origin, which
/// is always admissible, so later stages never increase a frame's error.
fn quantize(stages: &[Codebook], frame: &[f64], tokens: &mut [u32]) -> Vec<f64> {
    let mut residual = frame.to_vec();
    for s in 0..stages.len() {
        let stage = &stages[s];
        let (nearest_code, _) = stage.nearest(&residual);
        let j = if s == 0 || admissible(stages, s, nearest_code, &tokens[..s]) {
            nearest_code
        } else {
            let mut ranked: Vec<(f64, usize)> = (0..stage.size())
                .map(|j| (squared_distance(&residual, stage.vector(j)), j))
                .collect();
            ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            ranked
                .into_iter()
                .map(|(_, j)| j)
                .find(|&j| admissible(stages, s, j, &tokens[..s]))
                .unwrap_or(nearest_code)
        };
        tokens[s] = j as u32;
        residual
            .iter_mut()
            .zip(stage.vector(j))
            .for_each(|(r, c)| *r -= c);
    }
    residual
}

/// Whether choosing code `j` at stage `s` after `prefix` keeps each earlier
/// token the nearest code to the reconstruction tail it would see on re-encoding.
fn admissible(stages: &[Codebook], s: usize, j: usize, prefix: &[u32]) -> bool {
    let mut tail = stages[s].vector(j).to_vec();
    for u in (0..s).rev() {
        let t = prefix[u] as usize;
        tail.iter_mut()
            .zip(stages[u].vector(t))
            .for_each(|(a, c)| *a += c);
        if stages[u].nearest(&tail).0 != t {
            return false;
        }
    }
    true
}

/// Fits the stage codebooks by k-means on successive residuals.
///
/// Stage `s` is seeded by k-means++ from `config.seed` on ChaCha stream `s`
/// and fit on the residuals left by encoding with stages `< s`. Stages after
/// the first keep code 0 fixed at the origin.
pub fn train_codebooks(features: &[FeatureMatrix], config: &CodecConfig) -> Result<RvqCodec> {
    config.validate()?;
    let dim = config.feature_dim;
    let rate = config.frame_rate()?;
    for m in features {
        if m.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: m.dim(),
            });
        }
        if m.frame_rate() != rate {
            return Err(Error::FrameRateMismatch {
                expected: rate.to_string(),
                actual: m.frame_rate().to_string(),
            });
        }
    }
    let n: usize = features.iter().map(FeatureMatrix::n_frames).sum();
    if n < config.codebook_size {
        return Err(Error::InsufficientFrames {
            required: config.codebook_size,
            actual: n,
        });
    }
    let frames: Vec<f64> = features
        .iter()
        .flat_map(|m| m.data().iter().copied())
        .collect();
    let mut residual = frames.clone();
    let mut stages: Vec<Codebook> = Vec::with_capacity(config.num_quantizers);
    let mut stage_mse = Vec::with_capacity(config.num_quantizers);
    let mut tokens = vec![0u32; config.num_quantizers];
    for s in 0..config.num_quantizers {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(s as u64);
        let fit = if s == 0 {
            let init = kmeans_plus_plus(&residual, dim, config.codebook_size, &mut rng);
            lloyd(&residual, dim, init, config.kmeans_iters)
        } else {
            let init = extend_plus_plus(
                &residual,
                dim,
                config.codebook_size,
                vec![0.0; dim],
                &mut rng,
            );
            lloyd_pinned(&residual, dim, init, config.kmeans_iters, 1)
        };
        stages.push(Codebook::new(fit.centroids, dim, fit.usage_counts)?);
        let mut total = 0.0;
        for (frame, out) in frames.chunks_exact(dim).zip(residual.chunks_exact_mut(dim)) {
            let r = quantize(&stages, frame, &mut tokens[..=s]);
            total += r.iter().map(|v| v * v).sum::<f64>();
            out.copy_from_slice(&r);
        }
        stage_mse.push(total / n as f64);
    }
    RvqCodec::new(config.clone(), stages, stage_mse)
}

/// Residual encoding: per frame and stage, the nearest admissible code to the
/// running residual, ties to the lowest index. The result is a fixed point of
/// `encode ∘ decode`.
pub fn encode(codec: &RvqCodec, features: &FeatureMatrix) -> Result<TokenSequence> {
    if features.dim() != codec.dim() {
        return Err(Error::DimensionMismatch {
            expected: codec.dim(),
            actual: features.dim(),
        });
    }
    let q = codec.num_quantizers();
    let mut streams = vec![Vec::with_capacity(features.n_frames()); q];
    let mut tokens = vec![0u32; q];
    for frame in features.rows() {
        codec.quantize_frame(frame, &mut tokens);
        for (stream, &tok) in streams.iter_mut().zip(&tokens) {
            stream.push(tok);
        }
    }
    TokenSequence::new(streams, codec.codebook_size() as u32, features.frame_rate())
}

/// Sums the selected code vectors of every stage.
pub fn decode(codec: &RvqCodec, tokens: &TokenSequence) -> Result<FeatureMatrix> {
    if tokens.codebook_size() as usize != codec.codebook_size() {
        return Err(Error::VocabularyMismatch {
            expected: format!("codebook size {}", codec.codebook_size()),
            actual: format!("codebook size {}", tokens.codebook_size()),
        });
    }
    if tokens.num_quantizers() != codec.num_quantizers() {
        return Err(Error::VocabularyMismatch {
            expected: format!("{} quantizers", codec.num_quantizers()),
            actual: format!("{} quantizers", tokens.num_quantizers()),
        });
    }
    let dim = codec.dim();
    let mut data = vec![0.0; tokens.len() * dim];
    for (stage, stream) in codec.stages().iter().zip(tokens.streams()) {
        for (t, &tok) in stream.iter().enumerate() {
            if tok as usize >= stage.size() {
                return Err(Error::TokenOutOfRange {
                    token: tok,
                    codebook_size: stage.size() as u32,
                    location: format!("frame {t}"),
                });
            }
            data[t * dim..(t + 1) * dim]
                .iter_mut()
                .zip(stage.vector(tok as usize))
                .for_each(|(d, c)| *d += c);
        }
    }
    FeatureMatrix::new(
        data,
        tokens.len(),
        dim,
        tokens.frame_rate(),
        FeatureKind::Decoded,
    )
}

/// Quantization losses of a fixed codec on `features`, weighted as in training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuantizationReport {
    pub frames: usize,
    /// Mean `‖x - q(x)‖²` with the codebooks held fixed.
    pub commitment: f64,
    /// The same distance with the inputs held fixed. Without gradients the
    /// two coincide; both are kept so each can carry its own weight.
    pub codebook: f64,
    pub commitment_weight: f64,
    pub codebook_weight: f64,
    pub weighted_total: f64,
}

pub fn quantization_report(
    codec: &RvqCodec,
    features: &FeatureMatrix,
) -> Result<QuantizationReport> {
    if features.dim() != codec.dim() {
        return Err(Error::DimensionMismatch {
            expected: codec.dim(),
            actual: features.dim(),
        });
    }
    let mut tokens = vec![0u32; codec.num_quantizers()];
    let total: f64 = features
        .rows()
        .map(|frame| {
            let residual = codec.quantize_frame(frame, &mut tokens);
            squared_distance(&residual, &vec![0.0; residual.len()])
        })
        .sum();
    let mean = if features.n_frames() == 0 {
        0.0
    } else {
        total / features.n_frames() as f64
    };
    let c = codec.config();
    Ok(QuantizationReport {
        frames: features.n_frames(),
        commitment: mean,
        codebook: mean,
        commitment_weight: c.commitment_weight,
        codebook_weight: c.codebook_weight,
        weighted_total: c.commitment_weight * mean + c.codebook_weight * mean,
    })
}
