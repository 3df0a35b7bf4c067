//! Two-class Gaussian task in two dimensions.
#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use semifactual_core::classifiers::{ClassifierConfig, GnbConfig};
use semifactual_core::{Classifier, ConformalRejector, Dataset, RejectOption};

pub const CENTERS: [[f64; 2]; 2] = [[-1.0, 0.0], [1.0, 0.0]];

/// `n` samples, classes alternating, unit-variance noise around `CENTERS`.
pub fn two_gaussians(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % 2;
        rows.push(vec![CENTERS[c][0] + noise.sample(&mut rng), CENTERS[c][1] + noise.sample(&mut rng)]);
        labels.push(c);
    }
    Dataset::new(rows, labels, vec!["x0".into(), "x1".into()], vec!["neg".into(), "pos".into()]).unwrap()
}

pub fn all_rows(data: &Dataset) -> Vec<usize> {
    (0..data.n_samples()).collect()
}

/// Naive Bayes fitted on one sample, calibrated on another, threshold `theta`.
pub fn fitted_rejector(seed: u64, n_train: usize, n_calib: usize, theta: f64) -> ConformalRejector<Classifier> {
    let train = two_gaussians(n_train, seed);
    let calib = two_gaussians(n_calib, seed ^ 0x9e37_79b9);
    let model = ClassifierConfig::Gnb(GnbConfig::default()).fit(&train, &all_rows(&train)).unwrap();
    ConformalRejector::calibrate(model, &calib, &all_rows(&calib)).unwrap().with_theta(theta).unwrap()
}

/// First `count` rejected points of a fresh sample.
pub fn rejected_points<R: RejectOption>(rejector: &R, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let pool = two_gaussians(40 * count, seed);
    let out: Vec<Vec<f64>> = pool
        .rows()
        .filter(|x| rejector.is_rejected(x).unwrap())
        .take(count)
        .map(<[f64]>::to_vec)
        .collect();
    assert_eq!(out.len(), count, "not enough rejected samples");
    out
}
