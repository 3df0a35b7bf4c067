//! Probabilistic classifiers behind a common contract.
//!
//! The conformal layer only needs class-probability vectors, so any model
//! that implements [`ProbabilisticClassifier`] can be equipped with a reject
//! option. Two families ship here: k-nearest neighbors and Gaussian naive
//! Bayes. Adding another family (a random forest, say) means implementing the
//! trait and adding a variant to [`ClassifierConfig`] and [`Classifier`].

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// A probability vector over `c` classes.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassProbabilities(Vec<f64>);

impl ClassProbabilities {
    /// Normalizes non-negative weights into probabilities.
    pub fn from_weights(mut weights: Vec<f64>) -> Self {
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        Self(weights)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Index of the largest entry, lowest index on ties.
    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }
}

/// Index of the first maximal entry.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub trait ProbabilisticClassifier {
    fn n_features(&self) -> usize;

    fn n_classes(&self) -> usize;

    /// Estimated `p(y | x)` for every class.
    fn predict_proba(&self, x: &[f64]) -> Result<ClassProbabilities>;

    /// Most probable class, ties resolved towards the lowest class index.
    fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(self.predict_proba(x)?.argmax())
    }
}

impl<T: ProbabilisticClassifier + ?Sized> ProbabilisticClassifier for &T {
    fn n_features(&self) -> usize {
        (**self).n_features()
    }
    fn n_classes(&self) -> usize {
        (**self).n_classes()
    }
    fn predict_proba(&self, x: &[f64]) -> Result<ClassProbabilities> {
        (**self).predict_proba(x)
    }
}

fn check_dim(expected: usize, x: &[f64]) -> Result<()> {
    if x.len() == expected {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got: x.len() })
    }
}

/// Settings for k-nearest neighbors.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct KnnConfig {
    pub k: usize,
    /// Pseudo-count added to every class before normalizing.
    pub smoothing: f64,
}

impl Default for KnnConfig {
    fn default() -> Self {
        Self { k: 5, smoothing: 1e-9 }
    }
}

/// k-NN with Euclidean distance; equal distances resolve to the earlier
/// training row.
#[derive(Debug, Clone)]
pub struct KnnModel {
    config: KnnConfig,
    n_features: usize,
    n_classes: usize,
    points: Vec<f64>,
    labels: Vec<usize>,
}

impl KnnModel {
    pub fn fit(data: &Dataset, rows: &[usize], config: KnnConfig) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Fit("no training rows".into()));
        }
        if config.k == 0 || config.k > rows.len() {
            return Err(Error::Fit(format!(
                "k = {} must lie in [1, {}] (number of training rows)",
                config.k,
                rows.len()
            )));
        }
        if !(config.smoothing >= 0.0) {
            return Err(Error::Fit("smoothing must be non-negative".into()));
        }
        let mut points = Vec::with_capacity(rows.len() * data.n_features());
        for &i in rows {
            points.extend_from_slice(data.row(i));
        }
        Ok(Self {
            config,
            n_features: data.n_features(),
            n_classes: data.n_classes(),
            points,
            labels: rows.iter().map(|&i| data.label(i)).collect(),
        })
    }

    pub fn k(&self) -> usize {
        self.config.k
    }

    /// Training positions of the k nearest points, nearest first.
    fn neighbors(&self, x: &[f64]) -> Vec<usize> {
        let k = self.config.k;
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        for (idx, p) in self.points.chunks_exact(self.n_features).enumerate() {
            let dist: f64 = p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            if best.len() == k && dist >= best[k - 1].0 {
                continue;
            }
            // Strict comparison keeps earlier rows ahead on equal distance.
            let pos = best.partition_point(|&(d, _)| d <= dist);
            best.insert(pos, (dist, idx));
            best.truncate(k);
        }
        best.into_iter().map(|(_, idx)| idx).collect()
    }
}

impl ProbabilisticClassifier for KnnModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict_proba(&self, x: &[f64]) -> Result<ClassProbabilities> {
        check_dim(self.n_features, x)?;
        let mut counts = vec![self.config.smoothing; self.n_classes];
        for idx in self.neighbors(x) {
            counts[self.labels[idx]] += 1.0;
        }
        Ok(ClassProbabilities::from_weights(counts))
    }
}

/// Settings for Gaussian naive Bayes.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct GnbConfig {
    /// Lower bound on every per-class feature variance.
    pub var_floor: f64,
}

impl Default for GnbConfig {
    fn default() -> Self {
        Self { var_floor: 1e-9 }
    }
}

#[derive(Debug, Clone)]
struct GaussianClass {
    log_prior: f64,
    means: Vec<f64>,
    variances: Vec<f64>,
    // -0.5 * sum(ln(2 pi var)), precomputed
    log_norm: f64,
}

/// Gaussian naive Bayes with class priors estimated from label frequencies.
#[derive(Debug, Clone)]
pub struct GnbModel {
    n_features: usize,
    classes: Vec<GaussianClass>,
}

impl GnbModel {
    pub fn fit(data: &Dataset, rows: &[usize], config: GnbConfig) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Fit("no training rows".into()));
        }
        if !(config.var_floor > 0.0) {
            return Err(Error::Fit("variance floor must be positive".into()));
        }
        let d = data.n_features();
        let n = rows.len() as f64;
        let mut classes = Vec::with_capacity(data.n_classes());
        for class in 0..data.n_classes() {
            let members: Vec<usize> = rows.iter().copied().filter(|&i| data.label(i) == class).collect();
            if members.is_empty() {
                return Err(Error::Fit(format!(
                    "class {:?} has no training rows",
                    data.class_names()[class]
                )));
            }
            let m = members.len() as f64;
            let means: Vec<f64> = (0..d).map(|j| data.column(j, &members).sum::<f64>() / m).collect();
            let variances: Vec<f64> = (0..d)
                .map(|j| {
                    let var = data
                        .column(j, &members)
                        .map(|v| (v - means[j]) * (v - means[j]))
                        .sum::<f64>()
                        / m;
                    var.max(config.var_floor)
                })
                .collect();
            let log_norm = -0.5
                * variances
                    .iter()
                    .map(|v| libm::log(2.0 * core::f64::consts::PI * v))
                    .sum::<f64>();
            classes.push(GaussianClass { log_prior: libm::log(m / n), means, variances, log_norm });
        }
        Ok(Self { n_features: d, classes })
    }

    pub fn priors(&self) -> Vec<f64> {
        self.classes.iter().map(|c| libm::exp(c.log_prior)).collect()
    }

    pub fn class_means(&self, class: usize) -> &[f64] {
        &self.classes[class].means
    }

    pub fn class_variances(&self, class: usize) -> &[f64] {
        &self.classes[class].variances
    }

    /// Unnormalized log joint `ln p(x, y)` per class.
    pub fn joint_log_likelihood(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.n_features, x)?;
        Ok(self
            .classes
            .iter()
            .map(|c| {
                let quad: f64 = x
                    .iter()
                    .zip(c.means.iter().zip(&c.variances))
                    .map(|(v, (m, var))| (v - m) * (v - m) / var)
                    .sum();
                c.log_prior + c.log_norm - 0.5 * quad
            })
            .collect())
    }
}

impl ProbabilisticClassifier for GnbModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn n_classes(&self) -> usize {
        self.classes.len()
    }

    fn predict_proba(&self, x: &[f64]) -> Result<ClassProbabilities> {
        let mut log_joint = self.joint_log_likelihood(x)?;
        let max = log_joint.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for v in &mut log_joint {
            *v = libm::exp(*v - max);
        }
        Ok(ClassProbabilities::from_weights(log_joint))
    }
}

/// Classifier family and its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields))]
pub enum ClassifierConfig {
    Knn(KnnConfig),
    Gnb(GnbConfig),
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self::Knn(KnnConfig::default())
    }
}

impl ClassifierConfig {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Knn(_) => "knn",
            Self::Gnb(_) => "gnb",
        }
    }

    pub fn fit(&self, data: &Dataset, rows: &[usize]) -> Result<Classifier> {
        match *self {
            Self::Knn(cfg) => KnnModel::fit(data, rows, cfg).map(Classifier::Knn),
            Self::Gnb(cfg) => GnbModel::fit(data, rows, cfg).map(Classifier::Gnb),
        }
    }
}

/// A fitted model of any supported family.
#[derive(Debug, Clone)]
pub enum Classifier {
    Knn(KnnModel),
    Gnb(GnbModel),
}

impl ProbabilisticClassifier for Classifier {
    fn n_features(&self) -> usize {
        match self {
            Self::Knn(m) => m.n_features(),
            Self::Gnb(m) => m.n_features(),
        }
    }

    fn n_classes(&self) -> usize {
        match self {
            Self::Knn(m) => m.n_classes(),
            Self::Gnb(m) => m.n_classes(),
        }
    }

    fn predict_proba(&self, x: &[f64]) -> Result<ClassProbabilities> {
        match self {
            Self::Knn(m) => m.predict_proba(x),
            Self::Gnb(m) => m.predict_proba(x),
        }
    }
}
