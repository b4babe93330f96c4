//! Style exclusion and score-threshold filtering.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::manifest::{CorpusManifest, UtteranceEntry};
use crate::dsp::wav::read_wav;
use crate::dsp::{estimate_f0_with, F0Config, Waveform};
use crate::error::{Error, Result};

/// Utterances removed per excluded tag, including tags that matched nothing.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StyleFilterSummary {
    pub removed: BTreeMap<String, usize>,
}

/// Drops entries whose style tag is in `excluded` (exact, case-sensitive match).
pub fn filter_styles(
    m: &CorpusManifest,
    excluded: &BTreeSet<String>,
) -> (CorpusManifest, StyleFilterSummary) {
    let mut removed: BTreeMap<String, usize> = excluded.iter().map(|t| (t.clone(), 0)).collect();
    for e in &m.entries {
        if let Some(n) = removed.get_mut(&e.style_tag) {
            *n += 1;
        }
    }
    (
        m.retain(|e| !excluded.contains(&e.style_tag)),
        StyleFilterSummary { removed },
    )
}

/// Scores one utterance's audio; higher is better. Must be deterministic.
pub trait UtteranceScorer: Sync {
    fn score(&self, entry: &UtteranceEntry, audio: &Waveform) -> f64;
}

/// Level in dB relative to full scale, from the RMS amplitude.
#[derive(Debug, Clone, Copy, Default)]
pub struct LevelScorer;

impl UtteranceScorer for LevelScorer {
    fn score(&self, _: &UtteranceEntry, audio: &Waveform) -> f64 {
        20.0 * (audio.rms() + 1e-10).log10()
    }
}

/// Fraction of voiced frames under YIN.
#[derive(Debug, Clone, Copy, Default)]
pub struct VoicingScorer {
    pub f0: F0Config,
}

impl UtteranceScorer for VoicingScorer {
    fn score(&self, _: &UtteranceEntry, audio: &Waveform) -> f64 {
        estimate_f0_with(audio, &self.f0).map_or(f64::NAN, |t| t.voiced_fraction())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub style_tag: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreFilterOutcome {
    pub manifest: CorpusManifest,
    /// One row per scored entry, in manifest order, kept or not.
    pub scores: Vec<ScoreRow>,
    pub warnings: Vec<String>,
}

/// Keeps entries with `score(entry) >= threshold`. Entries whose score cannot
/// be computed, or is NaN, are dropped with a warning.
pub fn filter_by_score_with<F>(
    m: &CorpusManifest,
    threshold: f64,
    mut score: F,
) -> ScoreFilterOutcome
where
    F: FnMut(&UtteranceEntry) -> Result<f64>,
{
    let mut keep = BTreeSet::new();
    let mut scores = Vec::new();
    let mut warnings = Vec::new();
    for e in &m.entries {
        match score(e) {
            Ok(s) if s.is_nan() => {
                warnings.push(format!("utterance {:?}: score is NaN, dropped", e.id))
            }
            Ok(s) => {
                scores.push(ScoreRow {
                    style_tag: e.style_tag.clone(),
                    score: s,
                });
                if s >= threshold {
                    keep.insert(e.id.clone());
                }
            }
            Err(err) => warnings.push(format!("utterance {:?}: {err}, dropped", e.id)),
        }
    }
    ScoreFilterOutcome {
        manifest: m.retain(|e| keep.contains(&e.id)),
        scores,
        warnings,
    }
}

/// [`filter_by_score_with`] reading each entry's audio from disk.
pub fn filter_by_score<S: UtteranceScorer + ?Sized>(
    m: &CorpusManifest,
    scorer: &S,
    threshold: f64,
) -> ScoreFilterOutcome {
    filter_by_score_with(m, threshold, |e| {
        let audio = read_wav(m.audio_path(e))?;
        Ok(scorer.score(e, &audio))
    })
}

/// Writes `style_tag,score` rows with a header line.
pub fn write_score_csv(path: impl AsRef<Path>, rows: &[ScoreRow]) -> Result<()> {
    let path = path.as_ref();
    let write = || -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for row in rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    };
    write().map_err(|e| e.at_path(path))
}

pub fn read_score_csv(path: impl AsRef<Path>) -> Result<Vec<ScoreRow>> {
    let path = path.as_ref();
    let read = || -> Result<Vec<ScoreRow>> {
        let mut r = csv::Reader::from_path(path)?;
        r.deserialize()
            .map(|row| row.map_err(Error::from))
            .collect()
    };
    read().map_err(|e| e.at_path(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::manifest::Split;
    use proptest::prelude::*;

    fn entry(id: &str, tag: &str) -> UtteranceEntry {
        UtteranceEntry {
            id: id.into(),
            audio_path: format!("{id}.wav"),
            style_tag: tag.into(),
            duration: 1.0,
            transcript: None,
            split: Split::Train,
        }
    }

    fn mixed() -> CorpusManifest {
        let tags = [
            "read", "whisper", "laughing", "read", "happy", "whisper", "Whisper",
        ];
        let entries = tags
            .iter()
            .enumerate()
            .map(|(i, t)| entry(&format!("u{i}"), t))
            .collect();
        CorpusManifest::new("mixed", ".", entries).unwrap()
    }

    fn set(tags: &[&str]) -> BTreeSet<String> {
        tags.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn empty_exclusion_is_identity() {
        let m = mixed();
        let (out, summary) = filter_styles(&m, &BTreeSet::new());
        assert_eq!(out, m);
        assert!(summary.removed.is_empty());
    }

    #[test]
    fn excludes_whisper_and_laughing() {
        let (out, summary) = filter_styles(&mixed(), &set(&["whisper", "laughing"]));
        assert_eq!(out.ids(), vec!["u0", "u3", "u4", "u6"]);
        assert_eq!(summary.removed["whisper"], 2);
        assert_eq!(summary.removed["laughing"], 1);
    }

    #[test]
    fn absent_tag_is_noop() {
        let m = mixed();
        let (out, summary) = filter_styles(&m, &set(&["singing"]));
        assert_eq!(out, m);
        assert_eq!(summary.removed["singing"], 0);
    }

    #[test]
    fn score_threshold() {
        let entries = vec![entry("a", "x"), entry("b", "y"), entry("c", "x")];
        let m = CorpusManifest::new("s", ".", entries).unwrap();
        let scores: BTreeMap<&str, f64> = [("a", 1.0), ("b", 2.0), ("c", 3.0)].into();
        let out = filter_by_score_with(&m, 2.0, |e| Ok(scores[e.id.as_str()]));
        assert_eq!(out.manifest.ids(), vec!["b", "c"]);
        assert_eq!(out.scores.len(), 3);
        assert_eq!(
            out.scores[1],
            ScoreRow {
                style_tag: "y".into(),
                score: 2.0
            }
        );
        let all = filter_by_score_with(&m, f64::NEG_INFINITY, |e| Ok(scores[e.id.as_str()]));
        assert_eq!(all.manifest, m);
        let constant = filter_by_score_with(&m, 0.7, |_| Ok(0.7));
        assert_eq!(constant.manifest, m);
    }

    #[test]
    fn unreadable_audio_dropped_with_warning() {
        let dir = tempfile::tempdir().unwrap();
        let w = Waveform::new(vec![0.5; 1600], 16000).unwrap();
        crate::dsp::wav::write_wav(dir.path().join("a.wav"), &w, Default::default()).unwrap();
        let m =
            CorpusManifest::new("s", dir.path(), vec![entry("a", "x"), entry("b", "x")]).unwrap();
        let out = filter_by_score(&m, &LevelScorer, -100.0);
        assert_eq!(out.manifest.ids(), vec!["a"]);
        assert_eq!(out.warnings.len(), 1);
        assert!(out.warnings[0].contains("\"b\""));
        assert!((out.scores[0].score - 20.0 * 0.5f64.log10()).abs() < 1e-3);
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scores.csv");
        let rows = vec![
            ScoreRow {
                style_tag: "read".into(),
                score: 3.25,
            },
            ScoreRow {
                style_tag: "whisper, soft".into(),
                score: -1.0,
            },
        ];
        write_score_csv(&path, &rows).unwrap();
        assert!(std::fs::read_to_string(&path)
            .unwrap()
            .starts_with("style_tag,score\n"));
        assert_eq!(read_score_csv(&path).unwrap(), rows);
    }

    proptest! {
        #[test]
        fn filters_idempotent_commuting_subsets(
            tags in proptest::collection::vec(0usize..4, 0..20),
            excluded in proptest::collection::btree_set(0usize..4, 0..3),
            threshold in 0.0f64..20.0,
        ) {
            let names = ["read", "whisper", "laughing", "happy"];
            let entries = tags.iter().enumerate().map(|(i, &t)| entry(&format!("u{i}"), names[t])).collect();
            let m = CorpusManifest::new("p", ".", entries).unwrap();
            let excluded: BTreeSet<String> = excluded.iter().map(|&i| names[i].to_string()).collect();
            let score = |e: &UtteranceEntry| Ok(e.id[1..].parse::<f64>().unwrap());
            let styles = |m: &CorpusManifest| filter_styles(m, &excluded).0;
            let scored = |m: &CorpusManifest| filter_by_score_with(m, threshold, score).manifest;

            prop_assert_eq!(styles(&styles(&m)), styles(&m));
            prop_assert_eq!(scored(&scored(&m)), scored(&m));
            prop_assert_eq!(styles(&scored(&m)), scored(&styles(&m)));
            let ids = m.ids();
            let out = styles(&scored(&m));
            let positions: Vec<usize> = out.ids().iter().map(|id| ids.iter().position(|x| x == id).unwrap()).collect();
            prop_assert!(positions.windows(2).all(|w| w[0] < w[1]));
        }
    }
}
