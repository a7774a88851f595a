//! End-to-end benchmark runs: corpus, segments, split, features, models and
//! reports, with every artifact written under one output directory:
//!
//! ```text
//! out/
//!   corpus/        manifest.json, <subject>.wav, <subject>.csv (synthetic runs)
//!   segments.json  segment metadata in corpus order
//!   splits.json    subject-to-split assignment
//!   features/      <kind>.csv
//!   models/        <task>_<model>_<features>.json
//!   reports/       tables, per-model report JSON, roc_points.csv
//!   run_record.json
//! ```

pub mod report;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::DspConfig;
use crate::eval::{macro_ovr_auc, roc_curve, AucReport};
use crate::features::{spec_for, FeatureExtractor, FeatureKind, FeatureMatrix, SegmentFeatures};
use crate::ingest::{self, BitDepth};
use crate::learn::{
    gbdt::{predict_gbdt, train_gbdt, GbdtModel, GbdtProfile},
    mlp::{train_mlp_with_validation, MlpConfig, MlpModel, TrainReport},
    LearnError,
};
use crate::synth::{synth_subject, CorpusConfig};
use crate::types::{AnnotatedRecording, PatternLabel, Task};
use crate::windowing::{segment_recording, stratified_group_split, SegmentInfo, Split, SplitAssignment, SplitRatio, WindowConfig};

pub use report::{emit_report, ModelReport, RocRow, RocSeries};

pub const RUN_RECORD_VERSION: &str = "bs-run-1";
pub const RUN_RECORD_FILE: &str = "run_record.json";
pub const SEGMENTS_FILE: &str = "segments.json";
pub const SPLITS_FILE: &str = "splits.json";

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("config: {0}")]
    Config(String),
    #[error("{stage}: {message}")]
    Data { stage: &'static str, message: String },
    #[error("{stage}: {message}")]
    Training { stage: &'static str, message: String },
    #[error("{stage}: cannot write {}: {message}", path.display())]
    Output {
        stage: &'static str,
        path: PathBuf,
        message: String,
    },
}

impl BenchError {
    /// Process exit status: 2 config, 3 data, 4 training.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) | BenchError::Output { .. } => 2,
            BenchError::Data { .. } => 3,
            BenchError::Training { .. } => 4,
        }
    }

    fn data(stage: &'static str, e: impl ToString) -> Self {
        BenchError::Data {
            stage,
            message: e.to_string(),
        }
    }

    fn training(stage: &'static str, e: impl ToString) -> Self {
        BenchError::Training {
            stage,
            message: e.to_string(),
        }
    }
}

/// Write `contents` to `path`, creating parent directories.
pub fn write_artifact(stage: &'static str, path: &Path, contents: impl AsRef<[u8]>) -> Result<(), BenchError> {
    let out_err = |e: std::io::Error| BenchError::Output {
        stage,
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(out_err)?;
    }
    fs::write(path, contents).map_err(out_err)
}

pub fn read_artifact(stage: &'static str, path: &Path) -> Result<String, BenchError> {
    fs::read_to_string(path).map_err(|e| BenchError::data(stage, format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorpusSource {
    Synthetic(CorpusConfig),
    /// Path to a `manifest.json` of external recordings.
    Manifest(PathBuf),
}

impl Default for CorpusSource {
    fn default() -> Self {
        CorpusSource::Synthetic(CorpusConfig::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    GbdtTabular,
    GbdtMfccStats,
    MlpTabular,
    MlpMfcc,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::GbdtTabular,
        ModelKind::GbdtMfccStats,
        ModelKind::MlpTabular,
        ModelKind::MlpMfcc,
    ];

    pub fn feature_kind(self) -> FeatureKind {
        match self {
            ModelKind::GbdtTabular | ModelKind::MlpTabular => FeatureKind::Tabular,
            ModelKind::GbdtMfccStats => FeatureKind::MfccStats,
            ModelKind::MlpMfcc => FeatureKind::Mfcc,
        }
    }

    pub fn is_gbdt(self) -> bool {
        matches!(self, ModelKind::GbdtTabular | ModelKind::GbdtMfccStats)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::GbdtTabular => "gbdt-tabular",
            ModelKind::GbdtMfccStats => "gbdt-mfcc-stats",
            ModelKind::MlpTabular => "mlp-tabular",
            ModelKind::MlpMfcc => "mlp-mfcc",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown model {s:?}"))
    }
}

/// One trainable entry: a roster model, plus its profile for GBDT.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub profile: Option<GbdtProfile>,
}

impl ModelSpec {
    /// Model column of the report tables, e.g. `gbdt-tuned` or `mlp`.
    pub fn model_tag(&self) -> String {
        match self.profile {
            Some(p) if self.kind.is_gbdt() => format!("gbdt-{}", p.as_str()),
            _ if self.kind.is_gbdt() => "gbdt".into(),
            _ => "mlp".into(),
        }
    }

    pub fn features_tag(&self) -> &'static str {
        self.kind.feature_kind().as_str()
    }

    pub fn file_stem(&self, task: Task) -> String {
        format!("{}_{}_{}", task.as_str(), self.model_tag(), self.features_tag())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub corpus: CorpusSource,
    pub window: WindowConfig,
    pub split: SplitRatio,
    pub split_seed: u64,
    pub dsp: DspConfig,
    pub roster: Vec<ModelKind>,
    pub gbdt_profiles: Vec<GbdtProfile>,
    pub mlp: MlpConfig,
    pub tasks: Vec<Task>,
    pub out_dir: PathBuf,
    /// Write the synthetic corpus as WAV + CSV under `corpus/`.
    pub persist_corpus: bool,
    pub corpus_bit_depth: BitDepth,
    /// Write feature matrices under `features/`.
    pub persist_features: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            corpus: CorpusSource::default(),
            window: WindowConfig::default(),
            split: SplitRatio::default(),
            split_seed: 0,
            dsp: DspConfig::default(),
            roster: vec![ModelKind::GbdtTabular],
            gbdt_profiles: vec![GbdtProfile::Paper, GbdtProfile::Tuned],
            mlp: MlpConfig::default(),
            tasks: vec![Task::Binary, Task::FiveClass],
            out_dir: PathBuf::from("out"),
            persist_corpus: true,
            corpus_bit_depth: BitDepth::Pcm16,
            persist_features: true,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        let cfg = |e: &dyn std::fmt::Display| BenchError::Config(e.to_string());
        if self.roster.is_empty() {
            return Err(BenchError::Config("roster is empty".into()));
        }
        if self.tasks.is_empty() {
            return Err(BenchError::Config("no tasks selected".into()));
        }
        if self.roster.iter().any(|k| k.is_gbdt()) && self.gbdt_profiles.is_empty() {
            return Err(BenchError::Config("GBDT in roster but no GBDT profile selected".into()));
        }
        self.window.validate().map_err(|e| cfg(&e))?;
        self.split.validate().map_err(|e| cfg(&e))?;
        if self.roster.iter().any(|k| !k.is_gbdt()) {
            self.mlp.validate().map_err(|e| cfg(&e))?;
        }
        if let CorpusSource::Synthetic(c) = &self.corpus {
            c.validate().map_err(|e| cfg(&e))?;
            self.dsp.validate(c.sample_rate_hz).map_err(|e| cfg(&e))?;
        }
        Ok(())
    }

    /// Apply one seed to the corpus, the split and the MLP.
    pub fn with_seed(mut self, seed: u64) -> Self {
        if let CorpusSource::Synthetic(c) = &mut self.corpus {
            c.seed = seed;
        }
        self.split_seed = seed;
        self.mlp.seed = seed;
        self
    }

    /// Roster expanded over GBDT profiles, in roster order.
    pub fn model_specs(&self) -> Vec<ModelSpec> {
        self.roster
            .iter()
            .flat_map(|&kind| {
                if kind.is_gbdt() {
                    self.gbdt_profiles
                        .iter()
                        .map(|&p| ModelSpec {
                            kind,
                            profile: Some(p),
                        })
                        .collect::<Vec<_>>()
                } else {
                    vec![ModelSpec { kind, profile: None }]
                }
            })
            .collect()
    }

    pub fn feature_kinds(&self) -> Vec<FeatureKind> {
        let mut kinds: Vec<FeatureKind> = self.roster.iter().map(|k| k.feature_kind()).collect();
        kinds.sort();
        kinds.dedup();
        kinds
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self, BenchError> {
        serde_json::from_str(text).map_err(|e| BenchError::Config(e.to_string()))
    }
}

/// Segments and feature matrices of a whole corpus, with audio dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusData {
    pub segments: Vec<SegmentInfo>,
    pub features: BTreeMap<FeatureKind, FeatureMatrix>,
    /// Annotated events per label, before windowing.
    pub event_counts: [usize; PatternLabel::COUNT],
    pub manifest_path: Option<PathBuf>,
}

struct Processed {
    segments: Vec<SegmentInfo>,
    rows: Vec<SegmentFeatures>,
    event_counts: [usize; PatternLabel::COUNT],
    entry: Option<ingest::ManifestEntry>,
}

fn process_recording(
    rec: &AnnotatedRecording,
    window: &WindowConfig,
    dsp: &DspConfig,
    kinds: &[FeatureKind],
    persist: Option<(&Path, BitDepth)>,
) -> Result<Processed, BenchError> {
    let entry = match persist {
        Some((dir, depth)) => Some(ingest::persist_recording(rec, dir, depth).map_err(|e| BenchError::Output {
            stage: "corpus",
            path: dir.join(&rec.subject_id),
            message: e.to_string(),
        })?),
        None => None,
    };
    let segs = segment_recording(rec, window).map_err(|e| BenchError::data("segment", e))?;
    let rows = if kinds.is_empty() {
        vec![SegmentFeatures::default(); segs.len()]
    } else {
        let extractor =
            FeatureExtractor::new(dsp, rec.waveform.sample_rate_hz()).map_err(|e| BenchError::data("features", e))?;
        segs.iter()
            .map(|s| extractor.extract(s.samples(), kinds))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| BenchError::data("features", e))?
    };
    let mut event_counts = [0; PatternLabel::COUNT];
    rec.events.iter().for_each(|e| event_counts[e.label.index()] += 1);
    Ok(Processed {
        segments: segs.iter().map(SegmentInfo::from).collect(),
        rows,
        event_counts,
        entry,
    })
}

fn assemble(
    parts: Vec<Processed>,
    kinds: &[FeatureKind],
    dsp: &DspConfig,
    window_len: usize,
    manifest_path: Option<PathBuf>,
) -> Result<CorpusData, BenchError> {
    let mut segments = Vec::new();
    let mut event_counts = [0; PatternLabel::COUNT];
    let mut features: BTreeMap<FeatureKind, FeatureMatrix> = kinds
        .iter()
        .map(|&k| {
            (
                k,
                FeatureMatrix {
                    spec: spec_for(k, dsp, window_len),
                    rows: Vec::new(),
                    labels: Vec::new(),
                    subject_ids: Vec::new(),
                    origins_s: Vec::new(),
                },
            )
        })
        .collect();
    for p in parts {
        for (c, n) in event_counts.iter_mut().zip(p.event_counts) {
            *c += n;
        }
        for (info, mut row) in p.segments.into_iter().zip(p.rows) {
            for (&k, m) in features.iter_mut() {
                let values = row.take(k).expect("kind was requested");
                if values.len() != m.spec.len() {
                    return Err(BenchError::data(
                        "features",
                        format!("{} row has {} values, expected {}", k, values.len(), m.spec.len()),
                    ));
                }
                m.rows.push(values);
                m.labels.push(info.label);
                m.subject_ids.push(info.subject_id.clone());
                m.origins_s.push(info.origin_s);
            }
            segments.push(info);
        }
    }
    Ok(CorpusData {
        segments,
        features,
        event_counts,
        manifest_path,
    })
}

/// Synthesize (or load), segment and featurize every recording, one subject at
/// a time so that only segment metadata and features stay in memory. With
/// `corpus_dir`, synthetic recordings are also written there.
pub fn build_corpus(
    source: &CorpusSource,
    window: &WindowConfig,
    dsp: &DspConfig,
    kinds: &[FeatureKind],
    corpus_dir: Option<(&Path, BitDepth)>,
) -> Result<CorpusData, BenchError> {
    match source {
        CorpusSource::Synthetic(cfg) => {
            cfg.validate().map_err(|e| BenchError::Config(e.to_string()))?;
            if let Some((dir, _)) = corpus_dir {
                fs::create_dir_all(dir).map_err(|e| BenchError::Output {
                    stage: "corpus",
                    path: dir.to_path_buf(),
                    message: e.to_string(),
                })?;
            }
            let parts = (0..cfg.n_subjects)
                .into_par_iter()
                .map(|i| {
                    let rec = synth_subject(cfg, i).map_err(|e| BenchError::data("corpus", e))?;
                    process_recording(&rec, window, dsp, kinds, corpus_dir)
                })
                .collect::<Result<Vec<_>, _>>()?;
            let manifest_path = match corpus_dir {
                Some((dir, _)) => {
                    let entries = parts.iter().filter_map(|p| p.entry.clone()).collect();
                    Some(ingest::write_manifest(dir, entries).map_err(|e| BenchError::Output {
                        stage: "corpus",
                        path: dir.join(ingest::MANIFEST_FILE),
                        message: e.to_string(),
                    })?)
                }
                None => None,
            };
            let window_len = window.in_samples(cfg.sample_rate_hz).0;
            assemble(parts, kinds, dsp, window_len, manifest_path)
        }
        CorpusSource::Manifest(path) => {
            let manifest = ingest::read_manifest(path).map_err(|e| BenchError::data("corpus", e))?;
            let base = ingest::manifest_base(path);
            let parts = manifest
                .entries
                .par_iter()
                .enumerate()
                .map(|(i, entry)| {
                    let rec = ingest::load_entry(base, entry)
                        .map_err(|m| BenchError::data("corpus", format!("entry {i} ({}): {m}", entry.subject_id)))?;
                    dsp.validate(rec.waveform.sample_rate_hz())
                        .map_err(|e| BenchError::data("corpus", format!("{}: {e}", entry.subject_id)))?;
                    let window_len = window.in_samples(rec.waveform.sample_rate_hz()).0;
                    process_recording(&rec, window, dsp, kinds, None).map(|p| (p, window_len))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let window_len = parts.first().map_or(0, |(_, w)| *w);
            if parts.iter().any(|(_, w)| *w != window_len) {
                return Err(BenchError::data("corpus", "recordings differ in sample rate"));
            }
            let parts = parts.into_iter().map(|(p, _)| p).collect();
            assemble(parts, kinds, dsp, window_len, Some(path.clone()))
        }
    }
}

/// Synthesize a corpus straight to `dir` (WAV + CSV + manifest), one subject
/// in memory at a time.
pub fn write_synthetic_corpus(cfg: &CorpusConfig, dir: &Path, depth: BitDepth) -> Result<PathBuf, BenchError> {
    cfg.validate().map_err(|e| BenchError::Config(e.to_string()))?;
    let out_err = |e: &dyn std::fmt::Display| BenchError::Output {
        stage: "synth",
        path: dir.to_path_buf(),
        message: e.to_string(),
    };
    fs::create_dir_all(dir).map_err(|e| out_err(&e))?;
    let entries = (0..cfg.n_subjects)
        .into_par_iter()
        .map(|i| {
            let rec = synth_subject(cfg, i).map_err(|e| BenchError::data("synth", e))?;
            ingest::persist_recording(&rec, dir, depth).map_err(|e| out_err(&e))
        })
        .collect::<Result<Vec<_>, _>>()?;
    ingest::write_manifest(dir, entries).map_err(|e| out_err(&e))
}

/// Rows and class indices of one split.
pub fn split_rows(matrix: &FeatureMatrix, split: &SplitAssignment, which: Split, task: Task) -> (Vec<Vec<f64>>, Vec<usize>) {
    let idx = split.indices(which);
    (
        idx.iter().map(|&i| matrix.rows[i].clone()).collect(),
        idx.iter().map(|&i| task.class_of(matrix.labels[i])).collect(),
    )
}

/// Fitted model of either family.
#[derive(Debug, Clone, PartialEq)]
pub enum TrainedModel {
    Gbdt(GbdtModel),
    Mlp(MlpModel, TrainReport),
}

impl TrainedModel {
    pub fn predict(&self, x: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, LearnError> {
        match self {
            TrainedModel::Gbdt(m) => predict_gbdt(m, x),
            TrainedModel::Mlp(m, _) => m.predict_proba(x),
        }
    }

    pub fn to_json(&self) -> String {
        match self {
            TrainedModel::Gbdt(m) => m.to_json(),
            TrainedModel::Mlp(m, _) => m.to_json(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, LearnError> {
        let v: serde_json::Value = serde_json::from_str(text)?;
        match v.get("version").and_then(|v| v.as_str()) {
            Some(crate::learn::gbdt::GBDT_VERSION) => Ok(TrainedModel::Gbdt(serde_json::from_value(v)?)),
            Some(crate::learn::mlp::MLP_VERSION) => Ok(TrainedModel::Mlp(
                serde_json::from_value(v)?,
                TrainReport {
                    initial_loss: f64::NAN,
                    epoch_losses: Vec::new(),
                    val_losses: Vec::new(),
                    best_epoch: 0,
                },
            )),
            other => Err(LearnError::Version(other.unwrap_or("").to_string())),
        }
    }
}

/// Fit `spec` for `task` on the train split (the MLP also reads the validation
/// split for checkpoint selection). Test rows are never read.
pub fn fit_model(
    spec: ModelSpec,
    task: Task,
    matrix: &FeatureMatrix,
    split: &SplitAssignment,
    mlp: &MlpConfig,
    seed: u64,
) -> Result<TrainedModel, BenchError> {
    let (x, y) = split_rows(matrix, split, Split::Train, task);
    let n_classes = task.n_classes();
    if spec.kind.is_gbdt() {
        let profile = spec.profile.unwrap_or(GbdtProfile::Tuned);
        let cfg = profile.config(seed);
        train_gbdt(&x, &y, n_classes, &cfg)
            .map(TrainedModel::Gbdt)
            .map_err(|e| BenchError::training("train", format!("{}: {e}", spec.file_stem(task))))
    } else {
        let (vx, vy) = split_rows(matrix, split, Split::Val, task);
        train_mlp_with_validation(&x, &y, &vx, &vy, n_classes, mlp)
            .map(|(m, r)| TrainedModel::Mlp(m, r))
            .map_err(|e| BenchError::training("train", format!("{}: {e}", spec.file_stem(task))))
    }
}

/// AUC report plus ROC curves for one model on one split.
pub fn evaluate(
    spec: ModelSpec,
    task: Task,
    model: &TrainedModel,
    matrix: &FeatureMatrix,
    split: &SplitAssignment,
    which: Split,
) -> Result<ModelReport, BenchError> {
    let (x, y) = split_rows(matrix, split, which, task);
    if x.is_empty() {
        return Err(BenchError::data("eval", format!("{} split is empty", which.as_str())));
    }
    let probs = model.predict(&x).map_err(|e| BenchError::data("eval", e))?;
    let auc: AucReport = macro_ovr_auc(&probs, &y, task.n_classes())
        .map_err(|e| BenchError::data("eval", format!("{} {}: {e}", spec.file_stem(task), which.as_str())))?;
    let names = task.class_names();
    // binary reports carry the BS curve only; five-class reports one per present class
    let curve_classes: Vec<usize> = match task {
        Task::Binary => vec![1],
        Task::FiveClass => auc.present_classes(),
    };
    let mut roc = Vec::new();
    for c in curve_classes {
        let scores: Vec<f64> = probs.iter().map(|p| p[c]).collect();
        let labels: Vec<bool> = y.iter().map(|&l| l == c).collect();
        if let Ok(points) = roc_curve(&scores, &labels) {
            roc.push(RocSeries {
                class: names[c].to_string(),
                points: points.iter().map(RocRow::from).collect(),
            });
        }
    }
    Ok(ModelReport {
        task,
        model: spec.model_tag(),
        features: spec.features_tag().to_string(),
        split: which,
        auc_per_class: names
            .iter()
            .zip(&auc.per_class)
            .map(|(n, a)| (n.to_string(), *a))
            .collect(),
        auc_macro: auc.macro_auc,
        n_per_class: names
            .iter()
            .zip(&auc.n_per_class)
            .map(|(n, k)| (n.to_string(), *k))
            .collect(),
        roc,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    pub corpus: Option<u64>,
    pub split: u64,
    pub model: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub version: String,
    pub config: BenchConfig,
    pub seeds: Seeds,
    /// Run metadata; the only non-deterministic fields.
    pub started_unix_s: u64,
    pub timings: Vec<StageTiming>,
    /// Paths relative to the output directory.
    pub artifacts: Vec<PathBuf>,
    pub event_counts: BTreeMap<String, usize>,
    /// Segment counts as `split -> class -> n` (five-class names).
    pub segment_counts: BTreeMap<String, BTreeMap<String, usize>>,
    pub reports: Vec<ModelReport>,
}

impl RunRecord {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("record serialises") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self, BenchError> {
        serde_json::from_str(text).map_err(|e| BenchError::data("report", e))
    }

    /// Report for (`task`, model tag, features tag, `split`).
    pub fn find(&self, task: Task, model: &str, features: &str, split: Split) -> Option<&ModelReport> {
        self.reports
            .iter()
            .find(|r| r.task == task && r.model == model && r.features == features && r.split == split)
    }
}

fn label_counts<'a>(labels: impl Iterator<Item = &'a PatternLabel>) -> BTreeMap<String, usize> {
    let mut counts: BTreeMap<String, usize> = PatternLabel::ALL.iter().map(|l| (l.table_name().to_string(), 0)).collect();
    for l in labels {
        *counts.get_mut(l.table_name()).expect("all labels present") += 1;
    }
    counts
}

/// Run every stage and write all artifacts under `cfg.out_dir`.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<RunRecord, BenchError> {
    cfg.validate()?;
    let started_unix_s = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let out = cfg.out_dir.as_path();
    let mut timings = Vec::new();
    let mut artifacts: Vec<PathBuf> = Vec::new();
    let mut clock = Instant::now();
    let mut lap = |stage: &str, timings: &mut Vec<StageTiming>| {
        timings.push(StageTiming {
            stage: stage.to_string(),
            seconds: clock.elapsed().as_secs_f64(),
        });
        clock = Instant::now();
    };
    write_artifact("config", &out.join("config.json"), cfg.to_json())?;
    artifacts.push("config.json".into());

    let corpus_dir = out.join("corpus");
    let persist = (cfg.persist_corpus && matches!(cfg.corpus, CorpusSource::Synthetic(_)))
        .then_some((corpus_dir.as_path(), cfg.corpus_bit_depth));
    let kinds = cfg.feature_kinds();
    let data = build_corpus(&cfg.corpus, &cfg.window, &cfg.dsp, &kinds, persist)?;
    if persist.is_some() {
        artifacts.push(PathBuf::from("corpus").join(ingest::MANIFEST_FILE));
    }
    write_artifact(
        "segment",
        &out.join(SEGMENTS_FILE),
        serde_json::to_string(&data.segments).expect("segments serialise"),
    )?;
    artifacts.push(SEGMENTS_FILE.into());
    lap("corpus+segment+features", &mut timings);

    let split = stratified_group_split(&data.segments, cfg.split, cfg.split_seed).map_err(|e| BenchError::data("split", e))?;
    write_artifact("split", &out.join(SPLITS_FILE), split.to_json() + "\n")?;
    artifacts.push(SPLITS_FILE.into());
    lap("split", &mut timings);

    if cfg.persist_features {
        for (kind, m) in &data.features {
            let rel = PathBuf::from("features").join(format!("{kind}.csv"));
            let mut buf = Vec::new();
            m.write_csv(&mut buf).map_err(|e| BenchError::data("features", e))?;
            write_artifact("features", &out.join(&rel), buf)?;
            artifacts.push(rel);
        }
        lap("write-features", &mut timings);
    }

    let mut reports = Vec::new();
    for &task in &cfg.tasks {
        for spec in cfg.model_specs() {
            let matrix = &data.features[&spec.kind.feature_kind()];
            let model = fit_model(spec, task, matrix, &split, &cfg.mlp, cfg.split_seed)?;
            let rel = PathBuf::from("models").join(format!("{}.json", spec.file_stem(task)));
            write_artifact("train", &out.join(&rel), model.to_json())?;
            artifacts.push(rel);
            lap(&format!("train:{}", spec.file_stem(task)), &mut timings);
            for which in [Split::Val, Split::Test] {
                reports.push(evaluate(spec, task, &model, matrix, &split, which)?);
            }
            lap(&format!("eval:{}", spec.file_stem(task)), &mut timings);
        }
    }

    let segment_counts = Split::ALL
        .iter()
        .map(|&s| {
            (
                s.as_str().to_string(),
                label_counts(split.indices(s).iter().map(|&i| &data.segments[i].label)),
            )
        })
        .collect();
    let event_counts = PatternLabel::ALL
        .iter()
        .map(|l| (l.table_name().to_string(), data.event_counts[l.index()]))
        .collect();
    let mut record = RunRecord {
        version: RUN_RECORD_VERSION.into(),
        config: cfg.clone(),
        seeds: Seeds {
            corpus: match &cfg.corpus {
                CorpusSource::Synthetic(c) => Some(c.seed),
                CorpusSource::Manifest(_) => None,
            },
            split: cfg.split_seed,
            model: cfg.mlp.seed,
        },
        started_unix_s,
        timings,
        artifacts,
        event_counts,
        segment_counts,
        reports,
    };
    let written = emit_report(std::slice::from_ref(&record), &out.join("reports"))?;
    record
        .artifacts
        .extend(written.iter().filter_map(|p| p.strip_prefix(out).ok().map(Path::to_path_buf)));
    lap("report", &mut record.timings);
    record.artifacts.push(RUN_RECORD_FILE.into());
    write_artifact("report", &out.join(RUN_RECORD_FILE), record.to_json())?;
    Ok(record)
}
