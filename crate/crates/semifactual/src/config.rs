//! Run configuration.
//!
//! A TOML document; every key is optional and unknown keys are rejected.
//! Command-line flags override the file. Example with all defaults:
//!
//! ```toml
//! seed = 0
//! k = 3
//! n_folds = 5
//! calib_fraction = 0.3
//! theta = "knee"        # or a number in (0, 1]
//! out = "out"
//!
//! [data]
//! path = "data/wine.csv"
//! label = "class"
//! impute_missing = false
//!
//! [model]
//! kind = "knn"          # knn: k, smoothing / gnb: var_floor
//! k = 5
//! smoothing = 1e-9
//!
//! [weights]
//! c_feasibility = 10.0
//! c_sf = 5.0
//! c_simple = 2.0
//! c_similarity = 1.0
//! c_diverse = 10.0
//! mu = 1
//!
//! [explainer]
//! change_epsilon = 1e-6
//! search_radius = 3.0   # inf disables the box
//! prefer_feasible = true
//! subspace_search = true  # extra simplex runs along single features
//!
//! [optimizer]
//! reflection = 1.0
//! expansion = 2.0
//! contraction = 0.5
//! shrink = 0.5
//! max_iter = 500
//! x_tol = 1e-6
//! f_tol = 1e-9
//! initial_step = 0.5
//! n_restarts = 3
//!
//! [perturbation]
//! fraction = 0.3
//! noise_std = 1.0
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use semifactual_core::classifiers::{ClassifierConfig, GnbConfig, KnnConfig};
use semifactual_core::eval::{ExperimentConfig, PerturbationConfig, ThetaMode};
use semifactual_core::{ExplainerConfig, LossWeights, SimplexConfig};

use crate::error::{CliError, Result};

/// Threshold setting as written in the config file or on the command line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThetaSetting {
    Knee,
    Fixed(f64),
}

impl FromStr for ThetaSetting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("knee") {
            return Ok(Self::Knee);
        }
        s.parse::<f64>()
            .map(Self::Fixed)
            .map_err(|_| format!("theta must be \"knee\" or a number, got {s:?}"))
    }
}

impl fmt::Display for ThetaSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Knee => f.write_str("knee"),
            Self::Fixed(v) => write!(f, "{v}"),
        }
    }
}

impl Serialize for ThetaSetting {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Self::Knee => s.serialize_str("knee"),
            Self::Fixed(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for ThetaSetting {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(v) => Ok(Self::Fixed(v)),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub path: Option<PathBuf>,
    pub label: String,
    pub impute_missing: bool,
}

impl Default for DataSection {
    fn default() -> Self {
        Self { path: None, label: "class".into(), impute_missing: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExplainerSection {
    pub change_epsilon: f64,
    pub search_radius: f64,
    pub prefer_feasible: bool,
    pub subspace_search: bool,
}

impl Default for ExplainerSection {
    fn default() -> Self {
        let d = ExplainerConfig::default();
        Self {
            change_epsilon: d.change_epsilon,
            search_radius: d.search_radius.unwrap_or(f64::INFINITY),
            prefer_feasible: d.prefer_feasible,
            subspace_search: d.subspace_search,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub k: usize,
    pub n_folds: usize,
    pub calib_fraction: f64,
    pub theta: ThetaSetting,
    /// Worker threads; 0 means one per available core.
    // neither affects results, so reports leave them out
    #[serde(skip_serializing)]
    pub jobs: usize,
    #[serde(skip_serializing)]
    pub out: PathBuf,
    pub data: DataSection,
    pub model: ClassifierConfig,
    pub weights: LossWeights,
    pub explainer: ExplainerSection,
    pub optimizer: SimplexConfig,
    pub perturbation: PerturbationConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let e = ExperimentConfig::default();
        Self {
            seed: e.seed,
            k: e.k,
            n_folds: e.n_folds,
            calib_fraction: e.calib_fraction,
            theta: ThetaSetting::Knee,
            jobs: 0,
            out: PathBuf::from("out"),
            data: DataSection::default(),
            model: e.classifier,
            weights: e.explainer.weights,
            explainer: ExplainerSection::default(),
            optimizer: e.explainer.optimizer,
            perturbation: e.perturbation,
        }
    }
}

/// Flag values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub dataset: Option<PathBuf>,
    pub label: Option<String>,
    pub model: Option<String>,
    pub theta: Option<ThetaSetting>,
    pub k: Option<usize>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
    pub impute_missing: bool,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.into(), source })?;
        Self::from_toml(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Loads `path` if given, applies the flag overrides and validates.
    pub fn resolve(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        cfg.apply(overrides)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(p) = &o.dataset {
            self.data.path = Some(p.clone());
        }
        if let Some(l) = &o.label {
            self.data.label = l.clone();
        }
        if o.impute_missing {
            self.data.impute_missing = true;
        }
        if let Some(m) = &o.model {
            // keep file hyperparameters when the family is unchanged
            if m != self.model.name() {
                self.model = match m.as_str() {
                    "knn" => ClassifierConfig::Knn(KnnConfig::default()),
                    "gnb" => ClassifierConfig::Gnb(GnbConfig::default()),
                    other => return Err(CliError::Config(format!("unknown model {other:?} (expected knn or gnb)"))),
                };
            }
        }
        if let Some(t) = o.theta {
            self.theta = t;
        }
        if let Some(k) = o.k {
            self.k = k;
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(j) = o.jobs {
            self.jobs = j;
        }
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
        Ok(())
    }

    pub fn dataset_path(&self) -> Result<&Path> {
        self.data
            .path
            .as_deref()
            .ok_or_else(|| CliError::Config("no dataset given (use --dataset or [data] path)".into()))
    }

    pub fn experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            classifier: self.model,
            explainer: ExplainerConfig {
                weights: self.weights,
                change_epsilon: self.explainer.change_epsilon,
                search_radius: self.explainer.search_radius.is_finite().then_some(self.explainer.search_radius),
                prefer_feasible: self.explainer.prefer_feasible,
                subspace_search: self.explainer.subspace_search,
                optimizer: self.optimizer.clone(),
            },
            perturbation: self.perturbation,
            theta: match self.theta {
                ThetaSetting::Knee => ThetaMode::Knee,
                ThetaSetting::Fixed(t) => ThetaMode::Fixed(t),
            },
            n_folds: self.n_folds,
            calib_fraction: self.calib_fraction,
            k: self.k,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_folds < 2 {
            return Err(CliError::Config(format!("n_folds must be at least 2, got {}", self.n_folds)));
        }
        if !(self.calib_fraction > 0.0 && self.calib_fraction < 1.0) {
            return Err(CliError::Config(format!("calib_fraction must lie in (0, 1), got {}", self.calib_fraction)));
        }
        if let ClassifierConfig::Knn(k) = self.model {
            if k.k == 0 {
                return Err(CliError::Config("model.k must be at least 1".into()));
            }
        }
        if self.explainer.search_radius.is_nan() {
            return Err(CliError::Config("explainer.search_radius must be a number".into()));
        }
        self.experiment().validate().map_err(|e| CliError::Config(e.to_string()))
    }
}
