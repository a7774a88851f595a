//! On-disk formats: WAV audio, annotation CSV and dataset manifests.

pub mod annotations;
pub mod wav;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{validate_recording, AnnotatedRecording};

pub use annotations::{read_annotations, write_annotations, AnnotationError};
pub use wav::{read_wav, read_wav_info, write_wav, BitDepth, WavError, WavInfo};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub wav_path: PathBuf,
    pub annotation_path: PathBuf,
    pub subject_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
}

/// Failure of a single manifest entry.
#[derive(Debug)]
pub struct EntryError {
    pub index: usize,
    pub subject_id: String,
    pub message: String,
}

impl fmt::Display for EntryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "entry {} ({}): {}", self.index, self.subject_id, self.message)
    }
}

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("manifest json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{} manifest entries failed:\n{}", .0.len(), .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n"))]
    Entries(Vec<EntryError>),
}

impl DatasetManifest {
    fn check(&self) -> Vec<EntryError> {
        let mut errors = Vec::new();
        for (index, e) in self.entries.iter().enumerate() {
            let mut problems = Vec::new();
            if e.subject_id.is_empty() {
                problems.push("empty subject_id");
            }
            if e.wav_path.as_os_str().is_empty() {
                problems.push("empty wav_path");
            }
            if e.annotation_path.as_os_str().is_empty() {
                problems.push("empty annotation_path");
            }
            if !problems.is_empty() {
                errors.push(EntryError {
                    index,
                    subject_id: e.subject_id.clone(),
                    message: problems.join(", "),
                });
            }
        }
        errors
    }
}

/// Load and validate one entry, resolving its paths against `base`.
pub fn load_entry(base: &Path, entry: &ManifestEntry) -> Result<AnnotatedRecording, String> {
    let waveform = read_wav(base.join(&entry.wav_path))
        .map_err(|e| format!("{}: {e}", entry.wav_path.display()))?;
    let events = read_annotations(base.join(&entry.annotation_path))
        .map_err(|e| format!("{}: {e}", entry.annotation_path.display()))?;
    let rec = AnnotatedRecording {
        subject_id: entry.subject_id.clone(),
        waveform,
        events,
    };
    let violations = validate_recording(&rec);
    if violations.is_empty() {
        Ok(rec)
    } else {
        Err(violations
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join("; "))
    }
}

/// Parse a manifest and check its entries are well-formed, without loading audio.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest, ManifestError> {
    let manifest: DatasetManifest = serde_json::from_slice(&fs::read(path)?)?;
    let errors = manifest.check();
    if errors.is_empty() {
        Ok(manifest)
    } else {
        Err(ManifestError::Entries(errors))
    }
}

/// Directory that relative entry paths resolve against.
pub fn manifest_base(path: &Path) -> &Path {
    path.parent().unwrap_or(Path::new("."))
}

/// Load and validate every entry. Relative paths resolve against the
/// manifest's directory. All failing entries are reported together.
pub fn load_manifest(
    path: impl AsRef<Path>,
) -> Result<(DatasetManifest, Vec<AnnotatedRecording>), ManifestError> {
    let path = path.as_ref();
    let manifest = read_manifest(path)?;
    let base = manifest_base(path).to_path_buf();
    let results: Vec<_> = manifest
        .entries
        .par_iter()
        .map(|e| load_entry(&base, e))
        .collect();
    let mut recordings = Vec::with_capacity(results.len());
    let mut errors = Vec::new();
    for (index, r) in results.into_iter().enumerate() {
        match r {
            Ok(rec) => recordings.push(rec),
            Err(message) => errors.push(EntryError {
                index,
                subject_id: manifest.entries[index].subject_id.clone(),
                message,
            }),
        }
    }
    if errors.is_empty() {
        Ok((manifest, recordings))
    } else {
        Err(ManifestError::Entries(errors))
    }
}

#[derive(Debug, Error)]
pub enum PersistError {
    #[error(transparent)]
    Wav(#[from] WavError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("manifest json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Write `<subject>.wav` and `<subject>.csv` into `dir`.
pub fn persist_recording(
    rec: &AnnotatedRecording,
    dir: impl AsRef<Path>,
    depth: BitDepth,
) -> Result<ManifestEntry, PersistError> {
    let dir = dir.as_ref();
    let wav_path = PathBuf::from(format!("{}.wav", rec.subject_id));
    let annotation_path = PathBuf::from(format!("{}.csv", rec.subject_id));
    write_wav(dir.join(&wav_path), &rec.waveform, depth)?;
    write_annotations(dir.join(&annotation_path), &rec.events)?;
    Ok(ManifestEntry {
        wav_path,
        annotation_path,
        subject_id: rec.subject_id.clone(),
    })
}

pub fn write_manifest(dir: impl AsRef<Path>, entries: Vec<ManifestEntry>) -> Result<PathBuf, PersistError> {
    let manifest_path = dir.as_ref().join(MANIFEST_FILE);
    fs::write(
        &manifest_path,
        serde_json::to_string_pretty(&DatasetManifest { entries })? + "\n",
    )?;
    Ok(manifest_path)
}

/// Write every recording plus `manifest.json` into `dir`, returning the
/// manifest path.
pub fn persist_corpus(
    recordings: &[AnnotatedRecording],
    dir: impl AsRef<Path>,
    depth: BitDepth,
) -> Result<PathBuf, PersistError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let entries = recordings
        .par_iter()
        .map(|rec| persist_recording(rec, dir, depth))
        .collect::<Result<Vec<_>, _>>()?;
    write_manifest(dir, entries)
}
