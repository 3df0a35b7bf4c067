//! Inductive conformal prediction on top of a probabilistic classifier and
//! the credibility-based reject option built from it.
//!
//! Non-conformity of a labeled point is the probability margin
//! `max_{i != y} p(i|x) - p(y|x)`. Calibration stores this score for every
//! held-out sample (pooled over labels). The p-value of a candidate label is
//! the smoothed fraction of calibration scores at least as large,
//! `(#{a_i >= score} + 1) / (n + 1)`, and the credibility of an input is its
//! largest p-value. An input is rejected when its credibility falls strictly
//! below the threshold.

mod knee;

pub use knee::{select_threshold_knee, KneePoint};

use alloc::vec::Vec;

use crate::classifiers::{argmax, ClassProbabilities, ProbabilisticClassifier};
use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// A certainty function paired with a rejection threshold.
///
/// Explanations and the evaluation harness only rely on this trait, so they
/// work with any reject option, not just the conformal one.
pub trait RejectOption {
    /// Certainty `r(x)`; larger is more certain.
    fn certainty(&self, x: &[f64]) -> Result<f64>;

    fn threshold(&self) -> Result<f64>;

    fn n_features(&self) -> usize;

    /// `r(x) < theta`.
    fn is_rejected(&self, x: &[f64]) -> Result<bool> {
        Ok(self.certainty(x)? < self.threshold()?)
    }
}

impl<T: RejectOption + ?Sized> RejectOption for &T {
    fn certainty(&self, x: &[f64]) -> Result<f64> {
        (**self).certainty(x)
    }
    fn threshold(&self) -> Result<f64> {
        (**self).threshold()
    }
    fn n_features(&self) -> usize {
        (**self).n_features()
    }
}

/// Probability margin of label `y`: best competing class minus `p(y|x)`.
pub fn non_conformity(probs: &ClassProbabilities, y: usize) -> Result<f64> {
    let p = probs.as_slice();
    if y >= p.len() {
        return Err(Error::ClassOutOfRange { class: y, n_classes: p.len() });
    }
    let rival = p
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != y)
        .map(|(_, &v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(rival - p[y])
}

/// Outcome of the classifier with reject option.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Prediction {
    Class(usize),
    Reject,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RejectDecision {
    pub credibility: f64,
    pub rejected: bool,
    pub prediction: Prediction,
}

/// A calibrated conformal predictor with an optional rejection threshold.
#[derive(Debug, Clone)]
pub struct ConformalRejector<M> {
    model: M,
    calib_scores: Vec<f64>,
    sorted_scores: Vec<f64>,
    theta: Option<f64>,
}

impl<M: ProbabilisticClassifier> ConformalRejector<M> {
    /// Scores every calibration row against its true label.
    pub fn calibrate(model: M, data: &Dataset, calib_rows: &[usize]) -> Result<Self> {
        if data.n_features() != model.n_features() {
            return Err(Error::DimensionMismatch { expected: model.n_features(), got: data.n_features() });
        }
        let scores = calib_rows
            .iter()
            .map(|&i| non_conformity(&model.predict_proba(data.row(i))?, data.label(i)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_scores(model, scores)
    }

    /// Uses precomputed calibration scores.
    pub fn from_scores(model: M, calib_scores: Vec<f64>) -> Result<Self> {
        if calib_scores.is_empty() {
            return Err(Error::EmptyCalibration);
        }
        let mut sorted_scores = calib_scores.clone();
        sorted_scores.sort_by(f64::total_cmp);
        Ok(Self { model, calib_scores, sorted_scores, theta: None })
    }

    /// Sets the threshold; it must lie in `(0, 1]`.
    pub fn with_theta(mut self, theta: f64) -> Result<Self> {
        self.set_theta(theta)?;
        Ok(self)
    }

    pub fn set_theta(&mut self, theta: f64) -> Result<()> {
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(Error::Config(alloc::format!("theta must lie in (0, 1], got {theta}")));
        }
        self.theta = Some(theta);
        Ok(())
    }

    pub fn theta(&self) -> Option<f64> {
        self.theta
    }

    pub fn model(&self) -> &M {
        &self.model
    }

    /// Calibration scores in calibration-row order.
    pub fn calib_scores(&self) -> &[f64] {
        &self.calib_scores
    }

    pub fn non_conformity(&self, x: &[f64], y: usize) -> Result<f64> {
        non_conformity(&self.model.predict_proba(x)?, y)
    }

    /// Smoothed p-value of a non-conformity score.
    pub fn p_value_of_score(&self, score: f64) -> f64 {
        let n = self.sorted_scores.len();
        let below = self.sorted_scores.partition_point(|&a| a < score);
        (n - below + 1) as f64 / (n + 1) as f64
    }

    pub fn p_value(&self, x: &[f64], y: usize) -> Result<f64> {
        Ok(self.p_value_of_score(self.non_conformity(x, y)?))
    }

    /// p-values of all classes, sharing one `predict_proba` call.
    pub fn p_values(&self, x: &[f64]) -> Result<Vec<f64>> {
        let probs = self.model.predict_proba(x)?;
        (0..probs.len())
            .map(|y| Ok(self.p_value_of_score(non_conformity(&probs, y)?)))
            .collect()
    }

    /// Largest p-value over all classes.
    pub fn credibility(&self, x: &[f64]) -> Result<f64> {
        Ok(self.p_values(x)?.into_iter().fold(0.0, f64::max))
    }

    pub fn decide(&self, x: &[f64]) -> Result<RejectDecision> {
        let theta = self.theta.ok_or(Error::ThresholdUnset)?;
        let p = self.p_values(x)?;
        let best = argmax(&p);
        let credibility = p[best];
        let rejected = credibility < theta;
        Ok(RejectDecision {
            credibility,
            rejected,
            prediction: if rejected { Prediction::Reject } else { Prediction::Class(best) },
        })
    }
}

impl<M: ProbabilisticClassifier> RejectOption for ConformalRejector<M> {
    fn certainty(&self, x: &[f64]) -> Result<f64> {
        self.credibility(x)
    }

    fn threshold(&self) -> Result<f64> {
        self.theta.ok_or(Error::ThresholdUnset)
    }

    fn n_features(&self) -> usize {
        self.model.n_features()
    }
}
