//! JSON-lines corpus manifests.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Self::Train),
            "dev" => Ok(Self::Dev),
            "test" => Ok(Self::Test),
            other => Err(Error::invalid(format!(
                "unknown split {other:?}; expected train, dev or test"
            ))),
        }
    }
}

/// One manifest line. Relative `audio_path`s are resolved against the
/// manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtteranceEntry {
    pub id: String,
    pub audio_path: String,
    pub style_tag: String,
    pub duration: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcript: Option<String>,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusManifest {
    pub source_name: String,
    /// Directory that relative audio paths are resolved against.
    pub base_dir: PathBuf,
    pub entries: Vec<UtteranceEntry>,
}

impl CorpusManifest {
    /// Validates ids and durations.
    pub fn new(
        source_name: impl Into<String>,
        base_dir: impl Into<PathBuf>,
        entries: Vec<UtteranceEntry>,
    ) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for (i, e) in entries.iter().enumerate() {
            validate_entry(e).map_err(|message| Error::Manifest {
                line: i + 1,
                message,
            })?;
            if !seen.insert(e.id.as_str()) {
                return Err(Error::DuplicateId(e.id.clone()));
            }
        }
        Ok(Self {
            source_name: source_name.into(),
            base_dir: base_dir.into(),
            entries,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.id.as_str()).collect()
    }

    pub fn audio_path(&self, entry: &UtteranceEntry) -> PathBuf {
        self.base_dir.join(&entry.audio_path)
    }

    /// Entries of one split, in order.
    pub fn split(&self, split: Split) -> Self {
        self.retain(|e| e.split == split)
    }

    pub(crate) fn retain(&self, keep: impl Fn(&UtteranceEntry) -> bool) -> Self {
        Self {
            source_name: self.source_name.clone(),
            base_dir: self.base_dir.clone(),
            entries: self.entries.iter().filter(|e| keep(e)).cloned().collect(),
        }
    }

    /// One canonical JSON object per line, fields in declaration order.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("plain entry"));
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_jsonl()).map_err(|e| Error::from(e).at_path(path))
    }
}

fn validate_entry(e: &UtteranceEntry) -> std::result::Result<(), String> {
    if e.id.is_empty() {
        return Err("empty utterance id".into());
    }
    if !(e.duration.is_finite() && e.duration > 0.0) {
        return Err(format!(
            "utterance {:?} has non-positive duration {}",
            e.id, e.duration
        ));
    }
    Ok(())
}

/// Parses manifest text; blank lines are skipped and errors carry 1-based line numbers.
pub fn parse_manifest(
    text: &str,
    source_name: &str,
    base_dir: impl Into<PathBuf>,
) -> Result<CorpusManifest> {
    let mut entries = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let entry: UtteranceEntry = serde_json::from_str(line).map_err(|e| Error::Manifest {
            line: i + 1,
            message: e.to_string(),
        })?;
        validate_entry(&entry).map_err(|message| Error::Manifest {
            line: i + 1,
            message,
        })?;
        if !seen.insert(entry.id.clone()) {
            return Err(Error::DuplicateId(entry.id));
        }
        entries.push(entry);
    }
    Ok(CorpusManifest {
        source_name: source_name.to_string(),
        base_dir: base_dir.into(),
        entries,
    })
}

/// A loaded manifest plus one warning per entry whose audio file is missing.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedManifest {
    pub manifest: CorpusManifest,
    pub warnings: Vec<String>,
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<LoadedManifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).at_path(path))?;
    let source = path
        .file_stem()
        .map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    let base = path.parent().map_or_else(PathBuf::new, Path::to_path_buf);
    let manifest = parse_manifest(&text, &source, base).map_err(|e| e.at_path(path))?;
    let warnings = manifest
        .entries
        .iter()
        .filter(|e| !manifest.audio_path(e).is_file())
        .map(|e| {
            format!(
                "utterance {:?}: audio file {} not found",
                e.id,
                manifest.audio_path(e).display()
            )
        })
        .collect();
    Ok(LoadedManifest { manifest, warnings })
}
