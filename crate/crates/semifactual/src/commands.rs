//! The `benchmark`, `inspect` and `explain` commands.

use std::fmt::Write as _;
use std::path::Path;

use log::{debug, info};
use rayon::prelude::*;

use semifactual_core::dataset::{split_folds, split_train_calib};
use semifactual_core::eval::{perturb, ExperimentConfig, ExperimentReport, Flip, FoldContext, FoldOutcome};
use semifactual_core::{Dataset, Error, ExplanationSet, RejectOption};

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::io::load_csv;
use crate::report::{self, BenchmarkReport, ExplanationRecord};

pub fn load_dataset(cfg: &RunConfig) -> Result<Dataset> {
    load_csv(cfg.dataset_path()?, &cfg.data.label, cfg.data.impute_missing)
}

/// File stem of the dataset, used as its display name.
pub fn dataset_name(cfg: &RunConfig) -> String {
    cfg.data
        .path
        .as_deref()
        .and_then(Path::file_stem)
        .map_or_else(|| "dataset".into(), |s| s.to_string_lossy().into_owned())
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start {jobs} worker threads: {e}")))
}

fn prepare_folds(data: &Dataset, cfg: &ExperimentConfig) -> Result<Vec<FoldContext>> {
    cfg.validate()?;
    let splits = split_folds(data.n_samples(), cfg.n_folds, cfg.calib_fraction, cfg.seed)?;
    let contexts = splits
        .into_par_iter()
        .enumerate()
        .map(|(fold, split)| FoldContext::prepare(data, fold, split, cfg))
        .collect::<Result<Vec<_>, Error>>()?;
    for ctx in &contexts {
        info!(
            "fold {}: theta {:.4}{}, {} of {} test rows rejected, {} flips",
            ctx.fold,
            ctx.theta(),
            if ctx.theta_degenerate { " (flat curve)" } else { "" },
            ctx.n_test_rejected,
            ctx.split.test.len(),
            ctx.flips.len()
        );
    }
    Ok(contexts)
}

/// Cross-validated experiment on `jobs` threads (0 = one per core).
///
/// Folds and flips are processed concurrently; results do not depend on the
/// thread count.
pub fn run_parallel(data: &Dataset, cfg: &ExperimentConfig, jobs: usize) -> Result<(ExperimentReport, Vec<FoldOutcome>)> {
    thread_pool(jobs)?.install(|| {
        let contexts = prepare_folds(data, cfg)?;
        let tasks: Vec<(usize, usize)> = contexts
            .iter()
            .enumerate()
            .flat_map(|(c, ctx)| (0..ctx.flips.len()).map(move |i| (c, i)))
            .collect();
        let mut explained = tasks
            .par_iter()
            .map(|&(c, i)| {
                let ctx = &contexts[c];
                debug!("fold {} row {}", ctx.fold, ctx.flips[i].row);
                ctx.explain(&ctx.flips[i])
            })
            .collect::<Result<Vec<_>, Error>>()?
            .into_iter();
        let outcomes: Vec<FoldOutcome> = contexts
            .into_iter()
            .map(|ctx| {
                let mine = explained.by_ref().take(ctx.flips.len()).collect();
                ctx.finish(mine)
            })
            .collect();
        let report = ExperimentReport::from_folds(data, cfg, outcomes.iter().map(|o| o.report.clone()).collect());
        Ok((report, outcomes))
    })
}

pub struct BenchmarkOutput {
    pub dataset: String,
    pub report: ExperimentReport,
    pub outcomes: Vec<FoldOutcome>,
    pub feature_names: Vec<String>,
}

pub fn benchmark(cfg: &RunConfig) -> Result<BenchmarkOutput> {
    let data = load_dataset(cfg)?;
    info!("{}: {} samples, {} features", dataset_name(cfg), data.n_samples(), data.n_features());
    let (report, outcomes) = run_parallel(&data, &cfg.experiment(), cfg.jobs)?;
    Ok(BenchmarkOutput { dataset: dataset_name(cfg), report, outcomes, feature_names: data.feature_names().to_vec() })
}

/// Runs the benchmark and writes its three output files.
pub fn benchmark_to_dir(cfg: &RunConfig, verbose: bool) -> Result<BenchmarkOutput> {
    let out = benchmark(cfg)?;
    let bench = BenchmarkReport { dataset: &out.dataset, config: cfg, report: &out.report };
    report::write_all(&cfg.out, &bench, &out.outcomes, &out.feature_names, verbose)?;
    Ok(out)
}

pub const HISTOGRAM_BUCKETS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct FoldInspection {
    pub fold: usize,
    pub theta: f64,
    pub theta_degenerate: bool,
    pub n_test: usize,
    pub n_rejected: usize,
    /// Test credibilities in equal-width buckets over `[0, 1]`.
    pub histogram: [usize; HISTOGRAM_BUCKETS],
}

impl FoldInspection {
    pub fn rejection_rate(&self) -> f64 {
        if self.n_test == 0 {
            0.0
        } else {
            self.n_rejected as f64 / self.n_test as f64
        }
    }
}

pub fn bucket_of(credibility: f64) -> usize {
    ((credibility * HISTOGRAM_BUCKETS as f64) as usize).min(HISTOGRAM_BUCKETS - 1)
}

pub fn inspect_data(data: &Dataset, cfg: &ExperimentConfig, jobs: usize) -> Result<Vec<FoldInspection>> {
    thread_pool(jobs)?.install(|| {
        let contexts = prepare_folds(data, cfg)?;
        contexts
            .par_iter()
            .map(|ctx| {
                let mut histogram = [0; HISTOGRAM_BUCKETS];
                for &i in &ctx.split.test {
                    histogram[bucket_of(ctx.rejector.credibility(ctx.data.row(i))?)] += 1;
                }
                Ok(FoldInspection {
                    fold: ctx.fold,
                    theta: ctx.theta(),
                    theta_degenerate: ctx.theta_degenerate,
                    n_test: ctx.split.test.len(),
                    n_rejected: ctx.n_test_rejected,
                    histogram,
                })
            })
            .collect()
    })
}

pub fn inspect(cfg: &RunConfig) -> Result<Vec<FoldInspection>> {
    let data = load_dataset(cfg)?;
    inspect_data(&data, &cfg.experiment(), cfg.jobs)
}

pub fn render_inspection(folds: &[FoldInspection]) -> String {
    const WIDTH: usize = 40;
    let mut s = String::new();
    for f in folds {
        let _ = writeln!(
            s,
            "fold {}: theta = {:.4}{}  rejected {}/{} ({:.1}%)",
            f.fold,
            f.theta,
            if f.theta_degenerate { " (flat curve, midpoint)" } else { "" },
            f.n_rejected,
            f.n_test,
            100.0 * f.rejection_rate()
        );
        let peak = f.histogram.iter().copied().max().unwrap_or(0).max(1);
        for (b, &count) in f.histogram.iter().enumerate() {
            let lo = b as f64 / HISTOGRAM_BUCKETS as f64;
            let hi = (b + 1) as f64 / HISTOGRAM_BUCKETS as f64;
            let close = if b + 1 == HISTOGRAM_BUCKETS { ']' } else { ')' };
            let bar = "#".repeat((count * WIDTH).div_ceil(peak));
            let _ = writeln!(s, "  [{lo:.1}, {hi:.1}{close} {count:>5} {bar}");
        }
    }
    s
}

/// What to explain.
#[derive(Debug, Clone, PartialEq)]
pub enum ExplainInput {
    Row(usize),
    /// Feature vector in original units.
    Vector(Vec<f64>),
}

pub fn parse_vector(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| {
            let v = v.trim();
            v.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| CliError::Config(format!("--x: {v:?} is not a finite number")))
        })
        .collect()
}

/// Fits on a train/calibration split of all rows and explains one input.
pub fn explain_data(
    data: &Dataset,
    cfg: &ExperimentConfig,
    input: &ExplainInput,
    perturbed: bool,
    verbose: bool,
) -> Result<(ExplanationSet, ExplanationRecord)> {
    cfg.validate()?;
    let split = split_train_calib(data.n_samples(), cfg.calib_fraction, cfg.seed)?;
    let ctx = FoldContext::prepare(data, 0, split, cfg)?;
    let (row, raw) = match input {
        ExplainInput::Row(r) => {
            if *r >= data.n_samples() {
                return Err(CliError::Config(format!("--row {r} out of range ({} rows)", data.n_samples())));
            }
            (Some(*r), data.row(*r).to_vec())
        }
        ExplainInput::Vector(v) => {
            if v.len() != data.n_features() {
                return Err(CliError::Config(format!(
                    "--x has {} values, the dataset has {} features",
                    v.len(),
                    data.n_features()
                )));
            }
            (None, v.clone())
        }
    };
    let x = ctx.standardizer.transform_row(&raw);
    let sample_index = row.map_or(u64::MAX, |r| r as u64);
    let x_perturbed = if perturbed { perturb(&x, &ctx.spec, sample_index) } else { x.clone() };
    info!(
        "theta {:.4}, credibility {:.4}",
        ctx.theta(),
        ctx.rejector.certainty(&x_perturbed)?
    );
    let flip = Flip { row: row.unwrap_or(usize::MAX), x, x_perturbed };
    let set = ctx.explain(&flip)?.explanation;
    let mut record = ExplanationRecord::new(&set, &ctx.standardizer, data.feature_names(), verbose);
    record.row = row;
    Ok((set, record))
}

pub fn explain(cfg: &RunConfig, input: &ExplainInput, perturbed: bool, verbose: bool) -> Result<ExplanationRecord> {
    let data = load_dataset(cfg)?;
    explain_data(&data, &cfg.experiment(), input, perturbed, verbose).map(|(_, rec)| rec)
}
