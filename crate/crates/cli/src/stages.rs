//! One function per subcommand. Stages communicate only through files under
//! the output directory, using the same layout as `bench`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use bsbench::bench::{
    build_corpus, emit_report, evaluate, fit_model, read_artifact, run_benchmark, write_artifact,
    write_synthetic_corpus, BenchConfig, BenchError, CorpusData, CorpusSource, RunRecord, Seeds, StageTiming,
    TrainedModel, RUN_RECORD_FILE, RUN_RECORD_VERSION, SEGMENTS_FILE, SPLITS_FILE,
};
use bsbench::features::{FeatureKind, FeatureMatrix};
use bsbench::windowing::{split_class_counts, stratified_group_split, SegmentInfo, Split, SplitAssignment};
use bsbench::PatternLabel;

const PROVENANCE_DIR: &str = "provenance";

fn data_err(stage: &'static str, e: impl ToString) -> BenchError {
    BenchError::Data {
        stage,
        message: e.to_string(),
    }
}

/// `<out>/provenance/<command>.json`: the effective config of this invocation.
pub fn write_provenance(cfg: &BenchConfig, command: &str, seed: Option<u64>) -> Result<(), BenchError> {
    let record = serde_json::json!({
        "command": command,
        "seed": seed,
        "bsbench_version": env!("CARGO_PKG_VERSION"),
        "config": serde_json::from_str::<serde_json::Value>(&cfg.to_json()).expect("config is json"),
    });
    let path = cfg.out_dir.join(PROVENANCE_DIR).join(format!("{command}.json"));
    let text = serde_json::to_string_pretty(&record).expect("provenance serialises") + "\n";
    write_artifact("provenance", &path, text)
}

fn print_counts(label: &str, counts: &[usize; PatternLabel::COUNT]) {
    let parts: Vec<String> = PatternLabel::ALL
        .iter()
        .map(|l| format!("{}={}", l.table_name(), counts[l.index()]))
        .collect();
    println!("{label}: {}", parts.join(" "));
}

fn label_counts<'a>(labels: impl Iterator<Item = &'a PatternLabel>) -> [usize; PatternLabel::COUNT] {
    let mut counts = [0; PatternLabel::COUNT];
    labels.for_each(|l| counts[l.index()] += 1);
    counts
}

pub fn synth(cfg: &BenchConfig) -> Result<(), BenchError> {
    let CorpusSource::Synthetic(corpus) = &cfg.corpus else {
        return Err(BenchError::Config("synth needs a synthetic corpus config".into()));
    };
    let manifest = write_synthetic_corpus(corpus, &cfg.out_dir.join("corpus"), cfg.corpus_bit_depth)?;
    println!("wrote {} subjects, manifest {}", corpus.n_subjects, manifest.display());
    Ok(())
}

fn write_segments(cfg: &BenchConfig, data: &CorpusData) -> Result<(), BenchError> {
    let text = serde_json::to_string(&data.segments).expect("segments serialise");
    write_artifact("segment", &cfg.out_dir.join(SEGMENTS_FILE), text)?;
    print_counts("events", &data.event_counts);
    print_counts("segments", &label_counts(data.segments.iter().map(|s| &s.label)));
    Ok(())
}

pub fn segment(cfg: &BenchConfig) -> Result<(), BenchError> {
    let data = build_corpus(&cfg.corpus, &cfg.window, &cfg.dsp, &[], None)?;
    write_segments(cfg, &data)
}

fn read_segments(out: &Path) -> Result<Vec<SegmentInfo>, BenchError> {
    let text = read_artifact("split", &out.join(SEGMENTS_FILE))?;
    serde_json::from_str(&text).map_err(|e| data_err("split", format!("{SEGMENTS_FILE}: {e}")))
}

fn print_split(segments: &[SegmentInfo], split: &SplitAssignment) {
    let counts = split_class_counts(segments, split);
    for s in Split::ALL {
        print_counts(s.as_str(), &counts[s as usize]);
    }
}

pub fn split(cfg: &BenchConfig) -> Result<(), BenchError> {
    let segments = read_segments(&cfg.out_dir)?;
    let split = stratified_group_split(&segments, cfg.split, cfg.split_seed).map_err(|e| data_err("split", e))?;
    write_artifact("split", &cfg.out_dir.join(SPLITS_FILE), split.to_json() + "\n")?;
    print_split(&segments, &split);
    Ok(())
}

fn features_path(out: &Path, kind: FeatureKind) -> PathBuf {
    out.join("features").join(format!("{kind}.csv"))
}

pub fn features(cfg: &BenchConfig) -> Result<(), BenchError> {
    let data = build_corpus(&cfg.corpus, &cfg.window, &cfg.dsp, &cfg.feature_kinds(), None)?;
    for (kind, m) in &data.features {
        let mut buf = Vec::new();
        m.write_csv(&mut buf).map_err(|e| data_err("features", e))?;
        write_artifact("features", &features_path(&cfg.out_dir, *kind), buf)?;
        println!("{kind}: {} rows x {} features", m.n_rows(), m.n_features());
    }
    write_segments(cfg, &data)
}

/// Feature matrices for the roster plus the split, indexed against the rows.
struct Inputs {
    matrices: BTreeMap<FeatureKind, FeatureMatrix>,
    split: SplitAssignment,
    segments: Vec<SegmentInfo>,
}

fn load_inputs(cfg: &BenchConfig, stage: &'static str) -> Result<Inputs, BenchError> {
    let out = cfg.out_dir.as_path();
    let mut matrices = BTreeMap::new();
    for kind in cfg.feature_kinds() {
        let path = features_path(out, kind);
        let text = read_artifact(stage, &path)?;
        let m = FeatureMatrix::read_csv(text.as_bytes(), kind.version())
            .map_err(|e| data_err(stage, format!("{}: {e}", path.display())))?;
        matrices.insert(kind, m);
    }
    let first = matrices.values().next().expect("roster is non-empty");
    let segments: Vec<SegmentInfo> = (0..first.n_rows())
        .map(|i| SegmentInfo {
            subject_id: first.subject_ids[i].clone(),
            origin_s: first.origins_s[i],
            label: first.labels[i],
        })
        .collect();
    if matrices.values().any(|m| m.subject_ids != first.subject_ids || m.labels != first.labels) {
        return Err(data_err(stage, "feature matrices disagree on rows"));
    }
    let text = read_artifact(stage, &out.join(SPLITS_FILE))?;
    let split = SplitAssignment::from_json(&text)
        .map_err(|e| data_err(stage, format!("{SPLITS_FILE}: {e}")))?
        .with_segments(&segments);
    if let Some(s) = segments.iter().find(|s| split.split_of(&s.subject_id).is_none()) {
        return Err(data_err(stage, format!("subject {} has no split", s.subject_id)));
    }
    Ok(Inputs {
        matrices,
        split,
        segments,
    })
}

fn model_path(out: &Path, stem: &str) -> PathBuf {
    out.join("models").join(format!("{stem}.json"))
}

pub fn train(cfg: &BenchConfig) -> Result<(), BenchError> {
    let inputs = load_inputs(cfg, "train")?;
    for &task in &cfg.tasks {
        for spec in cfg.model_specs() {
            let matrix = &inputs.matrices[&spec.kind.feature_kind()];
            let start = Instant::now();
            let model = fit_model(spec, task, matrix, &inputs.split, &cfg.mlp, cfg.split_seed)?;
            let stem = spec.file_stem(task);
            write_artifact("train", &model_path(&cfg.out_dir, &stem), model.to_json())?;
            println!("{stem}: trained in {:.1} s", start.elapsed().as_secs_f64());
        }
    }
    Ok(())
}

pub fn eval(cfg: &BenchConfig) -> Result<(), BenchError> {
    let started_unix_s = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let out = cfg.out_dir.as_path();
    let inputs = load_inputs(cfg, "eval")?;
    let mut reports = Vec::new();
    let mut timings = Vec::new();
    for &task in &cfg.tasks {
        for spec in cfg.model_specs() {
            let start = Instant::now();
            let stem = spec.file_stem(task);
            let text = read_artifact("eval", &model_path(out, &stem))?;
            let model = TrainedModel::from_json(&text).map_err(|e| data_err("eval", format!("{stem}: {e}")))?;
            let matrix = &inputs.matrices[&spec.kind.feature_kind()];
            for which in [Split::Val, Split::Test] {
                let r = evaluate(spec, task, &model, matrix, &inputs.split, which)?;
                println!("{stem} {}: macro AUC {:.4}", which.as_str(), r.auc_macro);
                reports.push(r);
            }
            timings.push(StageTiming {
                stage: format!("eval:{stem}"),
                seconds: start.elapsed().as_secs_f64(),
            });
        }
    }
    let counts = split_class_counts(&inputs.segments, &inputs.split);
    let segment_counts = Split::ALL
        .iter()
        .map(|&s| {
            let per = PatternLabel::ALL
                .iter()
                .map(|l| (l.table_name().to_string(), counts[s as usize][l.index()]))
                .collect();
            (s.as_str().to_string(), per)
        })
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
        artifacts: Vec::new(),
        event_counts: BTreeMap::new(),
        segment_counts,
        reports,
    };
    let written = emit_report(std::slice::from_ref(&record), &out.join("reports"))?;
    record.artifacts = written
        .iter()
        .filter_map(|p| p.strip_prefix(out).ok().map(Path::to_path_buf))
        .collect();
    record.artifacts.push(RUN_RECORD_FILE.into());
    write_artifact("eval", &out.join(RUN_RECORD_FILE), record.to_json())
}

pub fn bench(cfg: &BenchConfig) -> Result<(), BenchError> {
    let record = run_benchmark(cfg)?;
    for r in record.reports.iter().filter(|r| r.split == Split::Test) {
        println!("{} {} {} test: macro AUC {:.4}", r.task.as_str(), r.model, r.features, r.auc_macro);
    }
    let total: f64 = record.timings.iter().map(|t| t.seconds).sum();
    println!("done in {total:.1} s, record {}", cfg.out_dir.join(RUN_RECORD_FILE).display());
    Ok(())
}

pub fn report(cfg: &BenchConfig, paths: &[PathBuf]) -> Result<(), BenchError> {
    let default = [cfg.out_dir.join(RUN_RECORD_FILE)];
    let paths = if paths.is_empty() { &default[..] } else { paths };
    let records = paths
        .iter()
        .map(|p| RunRecord::from_json(&read_artifact("report", p)?))
        .collect::<Result<Vec<_>, _>>()?;
    let written = emit_report(&records, &cfg.out_dir.join("reports"))?;
    println!("wrote {} report files", written.len());
    Ok(())
}
