//! Random search over sampling parameters and binned-variance importance.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::{decode, RvqCodec};
use crate::error::{Error, Result};
use crate::sampler::{generate_from, stream_rng, Generation, LogitSource, SamplingParams};

pub const DEFAULT_TRIALS: usize = 300;
pub const DEFAULT_BINS: usize = 10;

/// Closed ranges for `k`, `p` and temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub k_min: usize,
    pub k_max: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub temperature_min: f64,
    pub temperature_max: f64,
}

impl SearchSpace {
    pub fn new(k: (usize, usize), p: (f64, f64), temperature: (f64, f64)) -> Result<Self> {
        let space = Self {
            k_min: k.0,
            k_max: k.1,
            p_min: p.0,
            p_max: p.1,
            temperature_min: temperature.0,
            temperature_max: temperature.1,
        };
        space.validate()?;
        Ok(space)
    }

    /// `k ∈ [5, 300]` (`[5, 200]` for a 256-code vocabulary), `p` and
    /// temperature in `[0.1, 1]`.
    pub fn for_codebook(codebook_size: usize) -> Self {
        let k_max = if codebook_size <= 256 { 200 } else { 300 };
        Self {
            k_min: 5,
            k_max,
            p_min: 0.1,
            p_max: 1.0,
            temperature_min: 0.1,
            temperature_max: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_min < 1 || self.k_max <= self.k_min {
            return Err(Error::invalid(format!(
                "k range must satisfy 1 <= k_min < k_max, got [{}, {}]",
                self.k_min, self.k_max
            )));
        }
        if !(self.p_min > 0.0 && self.p_min < self.p_max && self.p_max <= 1.0) {
            return Err(Error::invalid(format!(
                "p range must satisfy 0 < p_min < p_max <= 1, got [{}, {}]",
                self.p_min, self.p_max
            )));
        }
        if !(self.temperature_min > 0.0
            && self.temperature_min < self.temperature_max
            && self.temperature_max.is_finite())
        {
            return Err(Error::invalid(format!(
                "temperature range must satisfy 0 < min < max, got [{}, {}]",
                self.temperature_min, self.temperature_max
            )));
        }
        Ok(())
    }

    pub fn contains(&self, params: &SamplingParams) -> bool {
        (self.k_min..=self.k_max).contains(&params.k)
            && (self.p_min..=self.p_max).contains(&params.p)
            && (self.temperature_min..=self.temperature_max).contains(&params.temperature)
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> SamplingParams {
        SamplingParams {
            k: rng.gen_range(self.k_min..=self.k_max),
            p: rng.gen_range(self.p_min..=self.p_max),
            temperature: rng.gen_range(self.temperature_min..=self.temperature_max),
        }
    }
}

/// One development prompt; generation continues after `prompt` for at most `max_len` tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DevContext {
    pub prompt: Vec<u32>,
    pub max_len: usize,
}

/// What a scorer sees for one generated sequence.
pub struct ScoringInput<'a> {
    pub params: &'a SamplingParams,
    pub generation: &'a Generation,
    pub context: &'a DevContext,
}

/// Higher is better. Must be deterministic in its input.
pub trait QualityScorer: Sync {
    fn score(&self, input: &ScoringInput<'_>) -> f64;
}

impl<F> QualityScorer for F
where
    F: Fn(&ScoringInput<'_>) -> f64 + Sync,
{
    fn score(&self, input: &ScoringInput<'_>) -> f64 {
        self(input)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trial {
    pub index: usize,
    pub params: SamplingParams,
    /// Mean score over the development contexts; `-inf` when the scorer
    /// returned a non-finite value.
    pub score: f64,
    /// Seed of the generation streams for this trial.
    pub seed: u64,
    pub non_finite_score: bool,
    /// Generations that hit `max_len` before the stop token.
    pub truncated: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TrialRecord {
    index: usize,
    k: usize,
    p: f64,
    temperature: f64,
    score: Option<f64>,
    seed: u64,
    truncated: usize,
    flags: Vec<String>,
}

impl From<&Trial> for TrialRecord {
    fn from(t: &Trial) -> Self {
        let mut flags = Vec::new();
        if t.non_finite_score {
            flags.push("non_finite_score".to_string());
        }
        if t.truncated > 0 {
            flags.push("truncated".to_string());
        }
        Self {
            index: t.index,
            k: t.params.k,
            p: t.params.p,
            temperature: t.params.temperature,
            score: t.score.is_finite().then_some(t.score),
            seed: t.seed,
            truncated: t.truncated,
            flags,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuningHistory {
    pub space: SearchSpace,
    pub trials: Vec<Trial>,
    /// Index of the earliest trial with the maximum score.
    pub best: usize,
}

impl TuningHistory {
    pub fn best_trial(&self) -> &Trial {
        &self.trials[self.best]
    }

    /// One JSON object per trial, in index order. Non-finite scores are written as `null`.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for t in &self.trials {
            out.push_str(&serde_json::to_string(&TrialRecord::from(t)).expect("plain record"));
            out.push('\n');
        }
        out
    }

    pub fn write_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut file = std::fs::File::create(path).map_err(|e| Error::from(e).at_path(path))?;
        file.write_all(self.to_jsonl().as_bytes())
            .map_err(|e| Error::from(e).at_path(path))
    }
}

fn earliest_max(trials: &[Trial]) -> usize {
    let mut best = 0;
    for (i, t) in trials.iter().enumerate() {
        if t.score > trials[best].score {
            best = i;
        }
    }
    best
}

/// Runs `n_trials` random-search trials.
///
/// Parameters and per-trial generation seeds are drawn in trial order from a
/// generator seeded with `seed`. Trial `i` generates one sequence per
/// development context `c`, using stream `c` of a generator seeded with the
/// trial seed, and records the mean score. Trials run in parallel; the
/// history is identical for any thread count.
pub fn tune<M, S>(
    space: &SearchSpace,
    scorer: &S,
    model: &M,
    contexts: &[DevContext],
    n_trials: usize,
    seed: u64,
) -> Result<TuningHistory>
where
    M: LogitSource + Sync + ?Sized,
    S: QualityScorer + ?Sized,
{
    space.validate()?;
    if n_trials == 0 {
        return Err(Error::invalid("at least one trial is required"));
    }
    if contexts.is_empty() {
        return Err(Error::Empty("development contexts".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let plans: Vec<(SamplingParams, u64)> = (0..n_trials)
        .map(|_| (space.draw(&mut rng), rng.gen()))
        .collect();
    let trials = plans
        .par_iter()
        .enumerate()
        .map(|(index, &(params, trial_seed))| {
            let mut total = 0.0;
            let mut truncated = 0;
            for (c, context) in contexts.iter().enumerate() {
                let mut gen_rng = stream_rng(trial_seed, c as u64);
                let generation = generate_from(
                    model,
                    &context.prompt,
                    &params,
                    context.max_len,
                    &mut gen_rng,
                )?;
                truncated += usize::from(generation.truncated());
                total += scorer.score(&ScoringInput {
                    params: &params,
                    generation: &generation,
                    context,
                });
            }
            let mean = total / contexts.len() as f64;
            Ok(Trial {
                index,
                params,
                score: if mean.is_finite() {
                    mean
                } else {
                    f64::NEG_INFINITY
                },
                seed: trial_seed,
                non_finite_score: !mean.is_finite(),
                truncated,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TuningHistory {
        space: *space,
        best: earliest_max(&trials),
        trials,
    })
}

/// Normalized importances; all zero when the score does not vary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Importance {
    pub k: f64,
    pub p: f64,
    pub temperature: f64,
}

impl Importance {
    /// Parameter names ordered from most to least important.
    pub fn ranking(&self) -> [&'static str; 3] {
        let mut items = [
            ("k", self.k),
            ("p", self.p),
            ("temperature", self.temperature),
        ];
        items.sort_by(|a, b| b.1.total_cmp(&a.1));
        items.map(|(name, _)| name)
    }
}

fn binned_variance(values: &[f64], scores: &[f64], lo: f64, hi: f64, bins: usize) -> f64 {
    let mut sums = vec![0.0; bins];
    let mut counts = vec![0usize; bins];
    for (&v, &s) in values.iter().zip(scores) {
        let b = (((v - lo) / (hi - lo)) * bins as f64)
            .floor()
            .clamp(0.0, (bins - 1) as f64) as usize;
        sums[b] += s;
        counts[b] += 1;
    }
    let means: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .filter(|(_, &c)| c > 0)
        .map(|(s, &c)| s / c as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / means.len() as f64;
    means.iter().map(|m| (m - grand) * (m - grand)).sum::<f64>() / means.len() as f64
}

/// For each parameter, bins the trials into `bins` equal-width bins over the
/// search range, takes the variance of the non-empty bins' mean scores and
/// normalizes the three variances to sum to 1. Trials with non-finite scores
/// are left out.
pub fn param_importance(history: &TuningHistory, bins: usize) -> Result<Importance> {
    if bins == 0 {
        return Err(Error::invalid("at least one bin is required"));
    }
    let trials: Vec<&Trial> = history
        .trials
        .iter()
        .filter(|t| t.score.is_finite())
        .collect();
    if trials.len() < 2 * bins {
        return Err(Error::TooFewTrials {
            required: 2 * bins,
            actual: trials.len(),
        });
    }
    let s = &history.space;
    let scores: Vec<f64> = trials.iter().map(|t| t.score).collect();
    let column = |f: fn(&SamplingParams) -> f64| -> Vec<f64> {
        trials.iter().map(|t| f(&t.params)).collect()
    };
    let vk = binned_variance(
        &column(|p| p.k as f64),
        &scores,
        s.k_min as f64,
        s.k_max as f64 + 1.0,
        bins,
    );
    let vp = binned_variance(&column(|p| p.p), &scores, s.p_min, s.p_max, bins);
    let vt = binned_variance(
        &column(|p| p.temperature),
        &scores,
        s.temperature_min,
        s.temperature_max,
        bins,
    );
    let total = vk + vp + vt;
    // bin means of a constant score can differ by rounding alone
    let scale = scores.iter().fold(0.0f64, |m, s| m.max(s.abs()));
    let negligible = (1e-12 * (1.0 + scale)).powi(2);
    if total <= negligible {
        return Ok(Importance {
            k: 0.0,
            p: 0.0,
            temperature: 0.0,
        });
    }
    Ok(Importance {
        k: vk / total,
        p: vp / total,
        temperature: vt / total,
    })
}

/// Proxy quality: the negative mean per-dimension squared distance between
/// decoded generated frames and the training feature centroid, minus a
/// penalty when a generation is truncated or empty.
#[derive(Debug, Clone)]
pub struct CentroidDistortionScorer {
    codec: RvqCodec,
    centroid: Vec<f64>,
    pub length_penalty: f64,
}

impl CentroidDistortionScorer {
    /// The centroid is the usage-weighted mean of each stage's codebook,
    /// summed over stages; after converged k-means this is the mean of the
    /// training frames.
    pub fn new(codec: RvqCodec) -> Self {
        let dim = codec.dim();
        let mut centroid = vec![0.0; dim];
        for stage in codec.stages() {
            let total: u64 = stage.usage_counts().iter().sum();
            if total == 0 {
                continue;
            }
            for (j, &count) in stage.usage_counts().iter().enumerate() {
                let w = count as f64 / total as f64;
                for (c, v) in centroid.iter_mut().zip(stage.vector(j)) {
                    *c += w * v;
                }
            }
        }
        Self {
            codec,
            centroid,
            length_penalty: 1.0,
        }
    }

    pub fn centroid(&self) -> &[f64] {
        &self.centroid
    }
}

impl QualityScorer for CentroidDistortionScorer {
    fn score(&self, input: &ScoringInput<'_>) -> f64 {
        let tokens = &input.generation.tokens;
        let penalty = if input.generation.truncated() || tokens.is_empty() {
            self.length_penalty
        } else {
            0.0
        };
        if tokens.is_empty() {
            return -penalty;
        }
        let Ok(frames) = decode(&self.codec, tokens) else {
            return f64::NAN;
        };
        let dim = frames.dim() as f64;
        let distortion: f64 = frames
            .rows()
            .map(|row| {
                row.iter()
                    .zip(&self.centroid)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    / dim
            })
            .sum::<f64>()
            / frames.n_frames() as f64;
        -distortion - penalty
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rate::Rate;
    use proptest::prelude::*;

    /// Uniform over four codes and the stop id.
    struct Uniform;

    impl LogitSource for Uniform {
        fn codebook_size(&self) -> u32 {
            4
        }
        fn frame_rate(&self) -> Rate {
            Rate::hz(50)
        }
        fn logits(&self, _: &[u32]) -> Vec<f64> {
            vec![0.0; 5]
        }
    }

    fn contexts() -> Vec<DevContext> {
        vec![DevContext {
            prompt: vec![],
            max_len: 4,
        }]
    }

    fn synthetic(input: &ScoringInput<'_>) -> f64 {
        let p = input.params;
        -(p.temperature - 0.4).powi(2)
            - 0.1 * (p.p - 0.5).powi(2)
            - 0.001 * (p.k as f64 - 50.0).powi(2)
    }

    #[test]
    fn constant_scorer_picks_first_and_zero_importance() {
        let space = SearchSpace::for_codebook(1024);
        let h = tune(
            &space,
            &|_: &ScoringInput<'_>| 0.1,
            &Uniform,
            &contexts(),
            50,
            7,
        )
        .unwrap();
        assert!(h.trials.iter().all(|t| t.score == 0.1));
        assert_eq!(h.best, 0);
        let imp = param_importance(&h, 10).unwrap();
        assert_eq!((imp.k, imp.p, imp.temperature), (0.0, 0.0, 0.0));
    }

    #[test]
    fn identical_seeds_identical_histories() {
        let space = SearchSpace::for_codebook(512);
        let a = tune(&space, &synthetic, &Uniform, &contexts(), 40, 3).unwrap();
        let b = tune(&space, &synthetic, &Uniform, &contexts(), 40, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_jsonl(), b.to_jsonl());
        let c = tune(&space, &synthetic, &Uniform, &contexts(), 40, 4).unwrap();
        assert_ne!(a.to_jsonl(), c.to_jsonl());
    }

    #[test]
    fn recovers_temperature_optimum() {
        let space = SearchSpace::new((40, 60), (0.1, 1.0), (0.1, 1.0)).unwrap();
        let h = tune(&space, &synthetic, &Uniform, &contexts(), 500, 11).unwrap();
        assert!((h.best_trial().params.temperature - 0.4).abs() < 0.05);
        assert_eq!(
            param_importance(&h, 10).unwrap().ranking()[0],
            "temperature"
        );
    }

    #[test]
    fn temperature_only_objective() {
        let space = SearchSpace::for_codebook(1024);
        let f = |i: &ScoringInput<'_>| (3.0 * i.params.temperature).sin();
        let h = tune(&space, &f, &Uniform, &contexts(), 300, 5).unwrap();
        let imp = param_importance(&h, 10).unwrap();
        assert!(imp.temperature > 0.8, "{imp:?}");
        assert!((imp.k + imp.p + imp.temperature - 1.0).abs() < 1e-12);
    }

    #[test]
    fn non_finite_scores_are_flagged() {
        let f = |i: &ScoringInput<'_>| {
            if i.params.k.is_multiple_of(2) {
                f64::NAN
            } else {
                1.0
            }
        };
        let h = tune(
            &SearchSpace::for_codebook(1024),
            &f,
            &Uniform,
            &contexts(),
            30,
            1,
        )
        .unwrap();
        for t in &h.trials {
            assert_eq!(t.non_finite_score, t.params.k % 2 == 0);
            if t.non_finite_score {
                assert_eq!(t.score, f64::NEG_INFINITY);
            }
        }
        assert!(h.best_trial().score == 1.0);
        let jsonl = h.to_jsonl();
        assert!(jsonl.contains("\"score\":null"));
        assert!(jsonl.contains("non_finite_score"));
    }

    #[test]
    fn jsonl_fields() {
        let h = tune(
            &SearchSpace::for_codebook(1024),
            &synthetic,
            &Uniform,
            &contexts(),
            3,
            1,
        )
        .unwrap();
        let lines: Vec<serde_json::Value> = h
            .to_jsonl()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        assert_eq!(lines.len(), 3);
        for (i, v) in lines.iter().enumerate() {
            assert_eq!(v["index"], i);
            for key in ["k", "p", "temperature", "score", "seed", "flags"] {
                assert!(v.get(key).is_some(), "{key}");
            }
        }
    }

    #[test]
    fn rejects_bad_requests() {
        let space = SearchSpace::for_codebook(1024);
        assert!(tune(&space, &synthetic, &Uniform, &[], 3, 0).is_err());
        assert!(tune(&space, &synthetic, &Uniform, &contexts(), 0, 0).is_err());
        assert!(SearchSpace::new((0, 5), (0.1, 1.0), (0.1, 1.0)).is_err());
        assert!(SearchSpace::new((5, 5), (0.1, 1.0), (0.1, 1.0)).is_err());
        assert!(SearchSpace::new((5, 6), (0.0, 1.0), (0.1, 1.0)).is_err());
        assert!(SearchSpace::new((5, 6), (0.1, 1.0), (0.0, 1.0)).is_err());
        let h = tune(&space, &synthetic, &Uniform, &contexts(), 19, 0).unwrap();
        assert!(matches!(
            param_importance(&h, 10),
            Err(Error::TooFewTrials {
                required: 20,
                actual: 19
            })
        ));
    }

    #[test]
    fn paper_spaces_are_expressible() {
        let a = SearchSpace::for_codebook(1024);
        let b = SearchSpace::for_codebook(256);
        assert_eq!((a.k_min, a.k_max), (5, 300));
        assert_eq!((b.k_min, b.k_max), (5, 200));
        assert_eq!(SearchSpace::for_codebook(512), a);
        for s in [a, b] {
            assert_eq!(
                (s.p_min, s.p_max, s.temperature_min, s.temperature_max),
                (0.1, 1.0, 0.1, 1.0)
            );
            s.validate().unwrap();
        }
    }

    #[test]
    fn centroid_scorer() {
        use crate::codec::{Codebook, CodecConfig, TokenSequence};
        use crate::sampler::Termination;
        let config = CodecConfig {
            feature_dim: 2,
            ..CodecConfig::acoustic(4)
        };
        let book = Codebook::new(
            vec![0.0, 0.0, 2.0, 0.0, 0.0, 2.0, 2.0, 2.0],
            2,
            vec![1, 1, 1, 1],
        )
        .unwrap();
        let rate = config.frame_rate().unwrap();
        let codec = RvqCodec::new(config, vec![book], vec![0.0]).unwrap();
        let scorer = CentroidDistortionScorer::new(codec);
        assert_eq!(scorer.centroid(), &[1.0, 1.0]);
        let params = SamplingParams::default();
        let ctx = DevContext {
            prompt: vec![],
            max_len: 8,
        };
        let score = |tokens: Vec<u32>, termination| {
            let generation = Generation {
                tokens: TokenSequence::single(tokens, 4, rate).unwrap(),
                termination,
            };
            scorer.score(&ScoringInput {
                params: &params,
                generation: &generation,
                context: &ctx,
            })
        };
        // every code sits at squared distance 2 from the centroid, 1 per dimension
        assert_eq!(score(vec![0, 3], Termination::Stopped), -1.0);
        assert_eq!(score(vec![0, 3], Termination::Truncated), -2.0);
        assert_eq!(score(vec![], Termination::Stopped), -1.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn params_stay_in_range(seed in any::<u64>(), small in any::<bool>()) {
            let space = SearchSpace::for_codebook(if small { 256 } else { 1024 });
            let h = tune(&space, &synthetic, &Uniform, &contexts(), 64, seed).unwrap();
            for t in &h.trials {
                prop_assert!(space.contains(&t.params));
            }
            let best = h.best_trial().score;
            prop_assert!(h.trials.iter().all(|t| t.score <= best));
            prop_assert!(h.trials[..h.best].iter().all(|t| t.score < best));
        }
    }
}
