//! Cross-validated evaluation of semifactual explanations of rejects.
//!
//! Per fold: standardize on the training rows, fit the classifier, calibrate
//! the conformal reject option, pick the threshold, perturb a random subset
//! of features on the test rows with Gaussian noise, keep the samples whose
//! decision flips from accept to reject, explain each of them and score the
//! explanations by feasibility, sparsity, diversity and recall of the
//! perturbed features.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::index::sample;
use rand_distr::{Distribution, Normal};

use crate::classifiers::{Classifier, ClassifierConfig};
use crate::conformal::{select_threshold_knee, ConformalRejector, RejectOption};
use crate::dataset::{split_folds, Dataset, FoldSplit, Standardizer};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_for};
use crate::semifactual::{compute_diverse_semifactuals, diversity_overlap, ExplainerConfig, ExplanationSet};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct PerturbationConfig {
    /// Share of features that receive noise.
    pub fraction: f64,
    /// Noise standard deviation in standardized units.
    pub noise_std: f64,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        Self { fraction: 0.3, noise_std: 1.0 }
    }
}

impl PerturbationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.fraction > 0.0 && self.fraction <= 1.0) {
            return Err(Error::Config(format!("perturbation fraction must lie in (0, 1], got {}", self.fraction)));
        }
        if !(self.noise_std > 0.0 && self.noise_std.is_finite()) {
            return Err(Error::Config(format!("noise_std must be positive, got {}", self.noise_std)));
        }
        Ok(())
    }
}

/// A perturbation with its feature subset drawn.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PerturbationSpec {
    pub fraction: f64,
    pub noise_std: f64,
    pub seed: u64,
    /// Sorted feature indices, `max(1, round(fraction * d))` of them.
    pub perturbed_features: Vec<usize>,
}

impl PerturbationSpec {
    pub fn resolve(config: &PerturbationConfig, n_features: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        let count = (libm::round(config.fraction * n_features as f64) as usize).clamp(1, n_features);
        let mut perturbed_features = sample(&mut rng_for(seed, &[0xfea7]), n_features, count).into_vec();
        perturbed_features.sort_unstable();
        Ok(Self { fraction: config.fraction, noise_std: config.noise_std, seed, perturbed_features })
    }
}

/// Adds `N(0, noise_std^2)` to the perturbed features; the draw depends only
/// on the perturbation seed and `sample_index`.
pub fn perturb(x: &[f64], spec: &PerturbationSpec, sample_index: u64) -> Vec<f64> {
    let mut rng = rng_for(spec.seed, &[0x0015e, sample_index]);
    let noise = Normal::new(0.0, spec.noise_std).expect("validated noise_std");
    let mut out = x.to_vec();
    for &j in &spec.perturbed_features {
        out[j] += noise.sample(&mut rng);
    }
    out
}

/// A test sample that was accepted but is rejected after perturbation.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Flip {
    pub row: usize,
    pub x: Vec<f64>,
    pub x_perturbed: Vec<f64>,
}

/// Perturbs every row of `rows` and keeps the accept-to-reject flips.
pub fn select_reject_flips<R: RejectOption + ?Sized>(
    rejector: &R,
    data: &Dataset,
    rows: &[usize],
    spec: &PerturbationSpec,
) -> Result<Vec<Flip>> {
    let mut flips = Vec::new();
    for &row in rows {
        let x = data.row(row);
        let x_perturbed = perturb(x, spec, row as u64);
        if !rejector.is_rejected(x)? && rejector.is_rejected(&x_perturbed)? {
            flips.push(Flip { row, x: x.to_vec(), x_perturbed });
        }
    }
    Ok(flips)
}

/// Share of all semifactuals that are feasible.
pub fn metric_feasibility(sets: &[ExplanationSet]) -> Option<f64> {
    let (ok, total) = sets
        .iter()
        .flat_map(|s| &s.semifactuals)
        .fold((0usize, 0usize), |(ok, n), sf| (ok + usize::from(sf.feasible), n + 1));
    (total > 0).then(|| ok as f64 / total as f64)
}

/// Mean share of features changed per semifactual.
pub fn metric_sparsity(sets: &[ExplanationSet]) -> Option<f64> {
    let (sum, total) = sets.iter().fold((0.0, 0usize), |(sum, n), s| {
        let d = s.n_features() as f64;
        let part: f64 = s.semifactuals.iter().map(|sf| sf.changed_features.len() as f64 / d).sum();
        (sum + part, n + s.semifactuals.len())
    });
    (total > 0).then(|| sum / total as f64)
}

/// Mean over sets of the average pairwise overlap share; 0 for single-member sets.
pub fn metric_diversity(sets: &[ExplanationSet], change_epsilon: f64) -> Option<f64> {
    if sets.is_empty() {
        return None;
    }
    let sum: f64 = sets
        .iter()
        .map(|s| {
            let d = s.n_features() as f64;
            let members = &s.semifactuals;
            let mut total = 0.0;
            let mut pairs = 0usize;
            for (i, a) in members.iter().enumerate() {
                for b in &members[i + 1..] {
                    let overlap = diversity_overlap(&a.delta, &b.delta, change_epsilon).unwrap_or(0);
                    total += overlap as f64 / d;
                    pairs += 1;
                }
            }
            if pairs == 0 {
                0.0
            } else {
                total / pairs as f64
            }
        })
        .sum();
    Some(sum / sets.len() as f64)
}

/// Mean over sets of the share of perturbed features used by any member.
pub fn metric_recall(sets: &[ExplanationSet], spec: &PerturbationSpec) -> Option<f64> {
    if sets.is_empty() || spec.perturbed_features.is_empty() {
        return None;
    }
    let denom = spec.perturbed_features.len() as f64;
    let sum: f64 = sets
        .iter()
        .map(|s| {
            let hit = spec
                .perturbed_features
                .iter()
                .filter(|&&j| s.semifactuals.iter().any(|sf| sf.changed_features.contains(&j)))
                .count();
            hit as f64 / denom
        })
        .sum();
    Some(sum / sets.len() as f64)
}

/// How the rejection threshold is chosen per fold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThetaMode {
    Fixed(f64),
    /// Knee of the training rows' credibility curve.
    Knee,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub classifier: ClassifierConfig,
    pub explainer: ExplainerConfig,
    pub perturbation: PerturbationConfig,
    pub theta: ThetaMode,
    pub n_folds: usize,
    pub calib_fraction: f64,
    pub k: usize,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            classifier: ClassifierConfig::default(),
            explainer: ExplainerConfig::default(),
            perturbation: PerturbationConfig::default(),
            theta: ThetaMode::Knee,
            n_folds: 5,
            calib_fraction: 0.3,
            k: 3,
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if let ThetaMode::Fixed(t) = self.theta {
            if !(t > 0.0 && t <= 1.0) {
                return Err(Error::Config(format!("theta must lie in (0, 1], got {t}")));
            }
        }
        self.explainer.validate()?;
        self.perturbation.validate()
    }
}

/// Per-fold metric values; `None` when the fold produced no explanations.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FoldMetrics {
    pub feasibility: f64,
    pub sparsity: f64,
    pub diversity: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FoldReport {
    pub fold: usize,
    pub theta: f64,
    /// The knee fallback was used.
    pub theta_degenerate: bool,
    pub n_train: usize,
    pub n_calib: usize,
    pub n_test: usize,
    /// Unperturbed test rows rejected.
    pub n_test_rejected: usize,
    pub n_flips: usize,
    pub n_semifactuals: usize,
    pub perturbed_features: Vec<usize>,
    pub metrics: Option<FoldMetrics>,
}

/// One explained flip.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExplainedSample {
    pub fold: usize,
    pub flip: Flip,
    pub explanation: ExplanationSet,
}

#[derive(Debug, Clone)]
pub struct FoldOutcome {
    pub report: FoldReport,
    pub standardizer: Standardizer,
    pub explanations: Vec<ExplainedSample>,
}

/// A fitted fold, ready to explain its flips.
pub struct FoldContext {
    pub fold: usize,
    pub split: FoldSplit,
    pub standardizer: Standardizer,
    pub data: Dataset,
    pub rejector: ConformalRejector<Classifier>,
    pub theta_degenerate: bool,
    pub spec: PerturbationSpec,
    pub flips: Vec<Flip>,
    pub n_test_rejected: usize,
    explainer: ExplainerConfig,
    k: usize,
    seed: u64,
}

impl FoldContext {
    /// Fits standardizer, classifier and reject option, and selects flips.
    pub fn prepare(raw: &Dataset, fold: usize, split: FoldSplit, config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let standardizer = Standardizer::fit(raw, &split.train)?;
        let data = standardizer.transform(raw);
        let model = config.classifier.fit(&data, &split.train)?;
        let mut rejector = ConformalRejector::calibrate(model, &data, &split.calib)?;

        let (theta, theta_degenerate) = match config.theta {
            ThetaMode::Fixed(t) => (t, false),
            ThetaMode::Knee => {
                let cred = split
                    .train
                    .iter()
                    .map(|&i| rejector.credibility(data.row(i)))
                    .collect::<Result<Vec<_>>>()?;
                let knee = select_threshold_knee(&cred)?;
                (knee.threshold, knee.degenerate)
            }
        };
        rejector.set_theta(theta)?;

        let fold_seed = derive_seed(config.seed, fold as u64);
        let spec = PerturbationSpec::resolve(&config.perturbation, data.n_features(), fold_seed)?;
        let flips = select_reject_flips(&rejector, &data, &split.test, &spec)?;
        let n_test_rejected = split
            .test
            .iter()
            .map(|&i| rejector.is_rejected(data.row(i)))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .filter(|&r| r)
            .count();

        Ok(Self {
            fold,
            split,
            standardizer,
            data,
            rejector,
            theta_degenerate,
            spec,
            flips,
            n_test_rejected,
            explainer: config.explainer.clone(),
            k: config.k,
            seed: fold_seed,
        })
    }

    pub fn theta(&self) -> f64 {
        self.rejector.theta().expect("theta is set in prepare")
    }

    /// Explains one flip; independent of the order flips are processed in.
    pub fn explain(&self, flip: &Flip) -> Result<ExplainedSample> {
        let mut cfg = self.explainer.clone();
        cfg.optimizer.seed = derive_seed(self.seed, (flip.row as u64).wrapping_add(0x5f00));
        let explanation = compute_diverse_semifactuals(&flip.x_perturbed, self.k, &self.rejector, &cfg)?;
        Ok(ExplainedSample { fold: self.fold, flip: flip.clone(), explanation })
    }

    /// Scores the explanations of this fold.
    pub fn finish(self, explanations: Vec<ExplainedSample>) -> FoldOutcome {
        let sets: Vec<ExplanationSet> = explanations.iter().map(|e| e.explanation.clone()).collect();
        let eps = self.explainer.change_epsilon;
        let metrics = match (
            metric_feasibility(&sets),
            metric_sparsity(&sets),
            metric_diversity(&sets, eps),
            metric_recall(&sets, &self.spec),
        ) {
            (Some(feasibility), Some(sparsity), Some(diversity), Some(recall)) => {
                Some(FoldMetrics { feasibility, sparsity, diversity, recall })
            }
            _ => None,
        };
        let report = FoldReport {
            fold: self.fold,
            theta: self.theta(),
            theta_degenerate: self.theta_degenerate,
            n_train: self.split.train.len(),
            n_calib: self.split.calib.len(),
            n_test: self.split.test.len(),
            n_test_rejected: self.n_test_rejected,
            n_flips: self.flips.len(),
            n_semifactuals: sets.iter().map(|s| s.semifactuals.len()).sum(),
            perturbed_features: self.spec.perturbed_features.clone(),
            metrics,
        };
        FoldOutcome { report, standardizer: self.standardizer, explanations }
    }
}

/// Runs one fold sequentially.
pub fn run_fold(raw: &Dataset, fold: usize, split: FoldSplit, config: &ExperimentConfig) -> Result<FoldOutcome> {
    let ctx = FoldContext::prepare(raw, fold, split, config)?;
    let explanations = ctx.flips.iter().map(|f| ctx.explain(f)).collect::<Result<Vec<_>>>()?;
    Ok(ctx.finish(explanations))
}

/// Mean and population variance across folds.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Summary {
    pub mean: f64,
    pub variance: f64,
    pub std_dev: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let variance = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Some(Self { mean, variance, std_dev: libm::sqrt(variance) })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricsRow {
    pub feasibility: Summary,
    pub sparsity: Summary,
    pub diversity: Summary,
    pub recall: Summary,
}

impl MetricsRow {
    /// Aggregates the folds that produced explanations.
    pub fn from_folds(folds: &[FoldReport]) -> Option<Self> {
        let m: Vec<FoldMetrics> = folds.iter().filter_map(|f| f.metrics).collect();
        let col = |f: fn(&FoldMetrics) -> f64| Summary::of(&m.iter().map(f).collect::<Vec<_>>());
        Some(Self {
            feasibility: col(|m| m.feasibility)?,
            sparsity: col(|m| m.sparsity)?,
            diversity: col(|m| m.diversity)?,
            recall: col(|m| m.recall)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExperimentReport {
    pub model: alloc::string::String,
    pub n_samples: usize,
    pub n_features: usize,
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<FoldReport>,
    /// `None` when no fold produced explanations.
    pub aggregate: Option<MetricsRow>,
}

impl ExperimentReport {
    pub fn from_folds(data: &Dataset, config: &ExperimentConfig, folds: Vec<FoldReport>) -> Self {
        Self {
            model: config.classifier.name().into(),
            n_samples: data.n_samples(),
            n_features: data.n_features(),
            k: config.k,
            seed: config.seed,
            aggregate: MetricsRow::from_folds(&folds),
            folds,
        }
    }
}

/// Full cross-validated experiment, sequential.
pub fn run_experiment(data: &Dataset, config: &ExperimentConfig) -> Result<(ExperimentReport, Vec<FoldOutcome>)> {
    config.validate()?;
    let splits = split_folds(data.n_samples(), config.n_folds, config.calib_fraction, config.seed)?;
    let outcomes = splits
        .into_iter()
        .enumerate()
        .map(|(fold, split)| run_fold(data, fold, split, config))
        .collect::<Result<Vec<_>>>()?;
    let report = ExperimentReport::from_folds(data, config, outcomes.iter().map(|o| o.report.clone()).collect());
    Ok((report, outcomes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semifactual::{BlacklistSet, Semifactual};
    use alloc::vec;

    fn sf(changed: &[usize], d: usize, feasible: bool) -> Semifactual {
        let mut delta = vec![0.0; d];
        for &j in changed {
            delta[j] = 1.0;
        }
        Semifactual {
            x_sf: delta.clone(),
            delta,
            credibility_sf: 0.0,
            feasible,
            changed_features: changed.to_vec(),
            loss: 0.0,
            n_evals: 0,
            converged: true,
        }
    }

    fn set(members: Vec<Semifactual>, d: usize) -> ExplanationSet {
        ExplanationSet {
            original_x: vec![0.0; d],
            credibility_x: 0.0,
            theta: 0.1,
            k: members.len(),
            blacklist_trace: vec![BlacklistSet::new(); members.len()],
            semifactuals: members,
            truncated: false,
        }
    }

    fn spec(features: Vec<usize>) -> PerturbationSpec {
        PerturbationSpec { fraction: 0.3, noise_std: 1.0, seed: 0, perturbed_features: features }
    }

    #[test]
    fn feasibility_counts() {
        let all = [set(vec![sf(&[0], 4, true), sf(&[1], 4, true)], 4)];
        assert_eq!(metric_feasibility(&all), Some(1.0));
        let none = [set(vec![sf(&[0], 4, false)], 4)];
        assert_eq!(metric_feasibility(&none), Some(0.0));
        let mixed = [
            set(vec![sf(&[0], 4, true), sf(&[1], 4, false)], 4),
            set(vec![sf(&[0], 4, true), sf(&[2], 4, true)], 4),
        ];
        assert_eq!(metric_feasibility(&mixed), Some(0.75));
        assert_eq!(metric_feasibility(&[]), None);
    }

    #[test]
    fn sparsity_shares() {
        assert_eq!(metric_sparsity(&[set(vec![sf(&[], 4, true)], 4)]), Some(0.0));
        assert_eq!(metric_sparsity(&[set(vec![sf(&[0, 1, 2, 3], 4, true)], 4)]), Some(1.0));
        let wine = metric_sparsity(&[set(vec![sf(&[5], 13, true)], 13)]).unwrap();
        assert!((wine - 1.0 / 13.0).abs() < 1e-12);
        assert!((wine - 0.08).abs() < 0.005);
    }

    #[test]
    fn diversity_pairs() {
        let disjoint = [set(vec![sf(&[0], 4, true), sf(&[1, 2], 4, true)], 4)];
        assert_eq!(metric_diversity(&disjoint, 1e-6), Some(0.0));
        let same = [set(vec![sf(&[0, 1], 4, true), sf(&[0, 1], 4, true)], 4)];
        assert_eq!(metric_diversity(&same, 1e-6), Some(0.5));
        // pairs: (a,b) 1 shared, (a,c) 0, (b,c) 2 -> (1/4 + 0 + 2/4)/3 = 0.25; single-member set -> 0
        let mixed = [
            set(vec![sf(&[0, 1], 4, true), sf(&[1, 2, 3], 4, true), sf(&[2, 3], 4, true)], 4),
            set(vec![sf(&[0], 4, true)], 4),
        ];
        assert!((metric_diversity(&mixed, 1e-6).unwrap() - 0.125).abs() < 1e-12);
    }

    #[test]
    fn recall_of_perturbed() {
        let s = spec(vec![0, 1, 2, 3]);
        assert_eq!(metric_recall(&[set(vec![sf(&[4, 5], 8, true)], 8)], &s), Some(0.0));
        assert_eq!(metric_recall(&[set(vec![sf(&[0, 1], 8, true), sf(&[2, 3], 8, true)], 8)], &s), Some(1.0));
        assert_eq!(metric_recall(&[set(vec![sf(&[1, 6], 8, true)], 8)], &s), Some(0.25));
    }

    #[test]
    fn perturbation_touches_exactly_the_subset() {
        let spec = PerturbationSpec::resolve(&PerturbationConfig::default(), 10, 5).unwrap();
        assert_eq!(spec.perturbed_features.len(), 3);
        let x = vec![1.0; 10];
        let xp = perturb(&x, &spec, 7);
        let differ: Vec<usize> = (0..10).filter(|&i| xp[i] != x[i]).collect();
        assert_eq!(differ, spec.perturbed_features);
        assert_eq!(perturb(&x, &spec, 7), xp);
        assert_ne!(perturb(&x, &spec, 8), xp);
    }

    #[test]
    fn vanishing_noise_leaves_input() {
        let cfg = PerturbationConfig { fraction: 0.5, noise_std: 1e-300 };
        let spec = PerturbationSpec::resolve(&cfg, 6, 1).unwrap();
        let x = vec![1.0, -2.0, 3.0, 0.5, 7.0, -1.0];
        assert_eq!(perturb(&x, &spec, 0), x);
    }

    #[test]
    fn at_least_one_feature_is_perturbed() {
        let cfg = PerturbationConfig { fraction: 0.01, noise_std: 1.0 };
        assert_eq!(PerturbationSpec::resolve(&cfg, 13, 0).unwrap().perturbed_features.len(), 1);
        let bad = PerturbationConfig { fraction: 0.0, noise_std: 1.0 };
        assert!(PerturbationSpec::resolve(&bad, 13, 0).is_err());
    }

    #[test]
    fn summary_population_variance() {
        let s = Summary::of(&[1.0, 3.0]).unwrap();
        assert_eq!(s.mean, 2.0);
        assert_eq!(s.variance, 1.0);
        assert_eq!(s.std_dev, 1.0);
        assert_eq!(Summary::of(&[]), None);
    }
}
