//! Corpus manifests, data selection and synthetic corpora.

mod filter;
mod manifest;
mod synth;

pub use filter::{
    filter_by_score, filter_by_score_with, filter_styles, read_score_csv, write_score_csv,
    LevelScorer, ScoreFilterOutcome, ScoreRow, StyleFilterSummary, UtteranceScorer, VoicingScorer,
};
pub use manifest::{
    load_manifest, parse_manifest, CorpusManifest, LoadedManifest, Split, UtteranceEntry,
};
pub use synth::{synthesize_corpus, write_synthetic_corpus, SynthSpec, SynthUtterance};
