//! Conformal reject option for probabilistic classifiers and diverse
//! semifactual ("even if ...") explanations of its rejects.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the CLI and
//! parallel execution live in the `semifactual` companion crate.
//!
//! Typical flow:
//!
//! 1. fit a [`classifiers::ClassifierConfig`] on training rows,
//! 2. wrap it in a [`conformal::ConformalRejector`] calibrated on held-out rows
//!    and give it a threshold (fixed, or [`conformal::select_threshold_knee`]),
//! 3. call [`semifactual::compute_diverse_semifactuals`] on a rejected input.
//!
//! [`eval`] runs the whole protocol under cross validation.

#![no_std]
// `!(x > 0.0)` style checks are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod classifiers;
pub mod conformal;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod optimize;
mod rng;
pub mod semifactual;

pub use classifiers::{ClassProbabilities, Classifier, ClassifierConfig, ProbabilisticClassifier};
pub use conformal::{ConformalRejector, Prediction, RejectDecision, RejectOption};
pub use dataset::{Dataset, FoldSplit, Standardizer};
pub use error::{Error, Result};
pub use optimize::{minimize, OptimResult, SimplexConfig};
pub use rng::derive_seed;
pub use semifactual::{
    compute_diverse_semifactuals, compute_semifactual, BlacklistSet, ExplainerConfig, ExplanationSet,
    LossWeights, Semifactual,
};
