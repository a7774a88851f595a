//! Report files: per-task tables, one JSON per (task, model, split) and ROC
//! points for external plotting.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{write_artifact, BenchError, RunRecord};
use crate::eval::RocPoint;
use crate::types::Task;
use crate::windowing::Split;

pub const ROC_FILE: &str = "roc_points.csv";

/// One ROC point; `threshold` is `None` for the leading (0, 0) point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocRow {
    pub threshold: Option<f64>,
    pub fpr: f64,
    pub tpr: f64,
}

impl From<&RocPoint> for RocRow {
    fn from(p: &RocPoint) -> Self {
        Self {
            threshold: p.threshold.is_finite().then_some(p.threshold),
            fpr: p.fpr,
            tpr: p.tpr,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocSeries {
    pub class: String,
    pub points: Vec<RocRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub task: Task,
    pub model: String,
    pub features: String,
    pub split: Split,
    /// `None` for classes absent from the evaluated split.
    pub auc_per_class: BTreeMap<String, Option<f64>>,
    pub auc_macro: f64,
    pub n_per_class: BTreeMap<String, usize>,
    pub roc: Vec<RocSeries>,
}

/// The JSON written per report.
#[derive(Serialize)]
struct ReportJson<'a> {
    task: Task,
    model: &'a str,
    features: &'a str,
    split: Split,
    auc_per_class: &'a BTreeMap<String, Option<f64>>,
    auc_macro: f64,
    n_per_class: &'a BTreeMap<String, usize>,
}

impl ModelReport {
    pub fn to_json(&self) -> String {
        let view = ReportJson {
            task: self.task,
            model: &self.model,
            features: &self.features,
            split: self.split,
            auc_per_class: &self.auc_per_class,
            auc_macro: self.auc_macro,
            n_per_class: &self.n_per_class,
        };
        serde_json::to_string_pretty(&view).expect("report serialises") + "\n"
    }

    /// Binary headline: the BS-vs-rest AUC.
    pub fn binary_auc(&self) -> Option<f64> {
        self.auc_per_class.get("BS").copied().flatten()
    }
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |a| format!("{a:.4}"))
}

/// Table rows for one (task, split) across runs, header first.
pub fn table_csv(records: &[RunRecord], task: Task, split: Split) -> String {
    let mut out = String::new();
    match task {
        Task::FiveClass => out.push_str("model,features,None,SB,MB,CRS,HS,macro\n"),
        Task::Binary => out.push_str("model,features,auc\n"),
    }
    for r in records.iter().flat_map(|r| &r.reports) {
        if r.task != task || r.split != split {
            continue;
        }
        match task {
            Task::FiveClass => {
                let per: Vec<String> = task
                    .class_names()
                    .iter()
                    .map(|c| cell(r.auc_per_class.get(*c).copied().flatten()))
                    .collect();
                let _ = writeln!(out, "{},{},{},{}", r.model, r.features, per.join(","), cell(Some(r.auc_macro)));
            }
            Task::Binary => {
                let _ = writeln!(out, "{},{},{}", r.model, r.features, cell(r.binary_auc()));
            }
        }
    }
    out
}

fn roc_csv(records: &[RunRecord]) -> String {
    let mut out = String::from("run,task,model,features,split,class,threshold,fpr,tpr\n");
    for (i, rec) in records.iter().enumerate() {
        for r in &rec.reports {
            for series in &r.roc {
                for p in &series.points {
                    let t = p.threshold.map_or_else(|| "inf".to_string(), |t| t.to_string());
                    let _ = writeln!(
                        out,
                        "{i},{},{},{},{},{},{t},{},{}",
                        r.task.as_str(),
                        r.model,
                        r.features,
                        r.split.as_str(),
                        series.class,
                        p.fpr,
                        p.tpr
                    );
                }
            }
        }
    }
    out
}

/// Write tables (`table_<task>_<split>.csv`), per-report JSON and
/// `roc_points.csv` into `dir`. Output depends only on the records' reports.
pub fn emit_report(records: &[RunRecord], dir: &Path) -> Result<Vec<PathBuf>, BenchError> {
    if records.is_empty() {
        return Err(BenchError::Config("no run records to report".into()));
    }
    let mut written = Vec::new();
    let mut tasks: Vec<Task> = records.iter().flat_map(|r| r.reports.iter().map(|m| m.task)).collect();
    tasks.sort();
    tasks.dedup();
    for &task in &tasks {
        for split in [Split::Test, Split::Val] {
            let path = dir.join(format!("table_{}_{}.csv", task.as_str(), split.as_str()));
            write_artifact("report", &path, table_csv(records, task, split))?;
            written.push(path);
        }
    }
    let prefix = records.len() > 1;
    for (i, rec) in records.iter().enumerate() {
        for r in &rec.reports {
            let stem = format!("{}_{}_{}_{}", r.task.as_str(), r.model, r.features, r.split.as_str());
            let name = if prefix { format!("run{i}_{stem}.json") } else { format!("{stem}.json") };
            let path = dir.join(name);
            write_artifact("report", &path, r.to_json())?;
            written.push(path);
        }
    }
    let path = dir.join(ROC_FILE);
    write_artifact("report", &path, roc_csv(records))?;
    written.push(path);
    Ok(written)
}
