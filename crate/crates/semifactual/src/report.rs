//! Output files: `report.json`, `report.csv` and `explanations.jsonl`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use semifactual_core::eval::{ExperimentReport, FoldOutcome, MetricsRow, Summary};
use semifactual_core::{ExplanationSet, Standardizer};

use crate::config::RunConfig;
use crate::error::{CliError, Result};

#[derive(Debug, Serialize)]
pub struct BenchmarkReport<'a> {
    pub dataset: &'a str,
    pub config: &'a RunConfig,
    #[serde(flatten)]
    pub report: &'a ExperimentReport,
}

/// Same vectors in standardized model units.
#[derive(Debug, Clone, Serialize)]
pub struct StandardizedView {
    pub x_sf: Vec<f64>,
    pub delta: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SemifactualRecord {
    pub step: usize,
    pub changed_features: Vec<String>,
    /// `x_sf - x` in original units.
    pub delta: Vec<f64>,
    pub x_sf: Vec<f64>,
    pub credibility_before: f64,
    pub credibility_after: f64,
    pub feasible: bool,
    pub loss: f64,
    pub n_evals: usize,
    pub blacklist: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub standardized: Option<StandardizedView>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExplanationRecord {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fold: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub row: Option<usize>,
    /// The explained input in original units.
    pub x: Vec<f64>,
    pub theta: f64,
    pub credibility: f64,
    pub k: usize,
    pub truncated: bool,
    pub semifactuals: Vec<SemifactualRecord>,
}

impl ExplanationRecord {
    pub fn new(set: &ExplanationSet, scaler: &Standardizer, feature_names: &[String], verbose: bool) -> Self {
        let names = |idx: &mut dyn Iterator<Item = usize>| idx.map(|j| feature_names[j].clone()).collect::<Vec<_>>();
        let semifactuals = set
            .semifactuals
            .iter()
            .zip(&set.blacklist_trace)
            .enumerate()
            .map(|(step, (sf, bl))| SemifactualRecord {
                step,
                changed_features: names(&mut sf.changed_features.iter().copied()),
                delta: scaler.inverse_delta(&sf.delta),
                x_sf: scaler.inverse_row(&sf.x_sf),
                credibility_before: set.credibility_x,
                credibility_after: sf.credibility_sf,
                feasible: sf.feasible,
                loss: sf.loss,
                n_evals: sf.n_evals,
                blacklist: names(&mut bl.iter()),
                standardized: verbose.then(|| StandardizedView { x_sf: sf.x_sf.clone(), delta: sf.delta.clone() }),
            })
            .collect();
        Self {
            fold: None,
            row: None,
            x: scaler.inverse_row(&set.original_x),
            theta: set.theta,
            credibility: set.credibility_x,
            k: set.k,
            truncated: set.truncated,
            semifactuals,
        }
    }
}

fn summary_cell(s: Option<Summary>) -> String {
    s.map_or_else(|| "n/a".into(), |s| format!("{:.3} ± {:.3}", s.mean, s.variance))
}

fn std_cell(s: Option<Summary>) -> String {
    s.map_or_else(|| "n/a".into(), |s| format!("{:.4}", s.std_dev))
}

pub const CSV_HEADER: [&str; 11] = [
    "dataset",
    "model",
    "feasibility",
    "sparsity",
    "diversity",
    "recall",
    "feasibility_std",
    "sparsity_std",
    "diversity_std",
    "recall_std",
    "n_explained",
];

/// One table row; metric cells read "mean ± variance" over folds.
pub fn csv_row(dataset: &str, report: &ExperimentReport) -> Vec<String> {
    let a = report.aggregate;
    let pick = |f: fn(&MetricsRow) -> Summary| a.as_ref().map(f);
    let cols = [pick(|m| m.feasibility), pick(|m| m.sparsity), pick(|m| m.diversity), pick(|m| m.recall)];
    let mut row = vec![dataset.to_string(), report.model.clone()];
    row.extend(cols.iter().map(|&s| summary_cell(s)));
    row.extend(cols.iter().map(|&s| std_cell(s)));
    row.push(report.folds.iter().map(|f| f.n_flips).sum::<usize>().to_string());
    row
}

pub fn write_csv(path: &Path, dataset: &str, report: &ExperimentReport) -> Result<()> {
    let csv_err = |source| CliError::Csv { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    w.write_record(csv_row(dataset, report)).map_err(csv_err)?;
    w.flush().map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

pub fn to_json(report: &BenchmarkReport<'_>) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

pub fn write_jsonl(path: &Path, outcomes: &[FoldOutcome], feature_names: &[String], verbose: bool) -> Result<()> {
    let io_err = |source| CliError::Io { path: path.to_path_buf(), source };
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    for outcome in outcomes {
        for e in &outcome.explanations {
            let mut rec = ExplanationRecord::new(&e.explanation, &outcome.standardizer, feature_names, verbose);
            rec.fold = Some(e.fold);
            rec.row = Some(e.flip.row);
            serde_json::to_writer(&mut w, &rec)?;
            w.write_all(b"\n").map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)
}

/// Writes all three benchmark outputs into `out_dir`, creating it if needed.
pub fn write_all(
    out_dir: &Path,
    bench: &BenchmarkReport<'_>,
    outcomes: &[FoldOutcome],
    feature_names: &[String],
    verbose: bool,
) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(|source| CliError::Io { path: out_dir.to_path_buf(), source })?;
    let json_path = out_dir.join("report.json");
    fs::write(&json_path, to_json(bench)?).map_err(|source| CliError::Io { path: json_path, source })?;
    write_csv(&out_dir.join("report.csv"), bench.dataset, bench.report)?;
    write_jsonl(&out_dir.join("explanations.jsonl"), outcomes, feature_names, verbose)
}
