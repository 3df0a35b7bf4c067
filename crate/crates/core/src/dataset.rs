//! Tabular data model: feature matrix, labels, standardization, imputation
//! and cross-validation splits.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::rng_for;

/// A labeled data set with a dense row-major feature matrix.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<usize>,
    feature_names: Vec<String>,
    class_names: Vec<String>,
}

impl Dataset {
    /// Builds a data set from per-row feature vectors.
    pub fn new(
        rows: Vec<Vec<f64>>,
        labels: Vec<usize>,
        feature_names: Vec<String>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let d = feature_names.len();
        if d == 0 {
            return Err(Error::InvalidDataset("at least one feature is required".into()));
        }
        if class_names.len() < 2 {
            return Err(Error::InvalidDataset(format!(
                "at least two classes are required, got {}",
                class_names.len()
            )));
        }
        if rows.len() != labels.len() {
            return Err(Error::InvalidDataset(format!(
                "{} feature rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        let mut features = Vec::with_capacity(rows.len() * d);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::InvalidDataset(format!(
                    "row {i} has {} values, expected {d}",
                    row.len()
                )));
            }
            features.extend_from_slice(row);
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= class_names.len()) {
            return Err(Error::ClassOutOfRange { class: bad, n_classes: class_names.len() });
        }
        Ok(Self { features, labels, feature_names, class_names })
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.n_features();
        &self.features[i * d..(i + 1) * d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.features.chunks_exact(self.n_features())
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    /// Column `j` restricted to `rows`.
    pub fn column<'a>(&'a self, j: usize, rows: &'a [usize]) -> impl Iterator<Item = f64> + 'a {
        rows.iter().map(move |&i| self.row(i)[j])
    }

    fn map_rows(&self, mut f: impl FnMut(&[f64], &mut [f64])) -> Self {
        let d = self.n_features();
        let mut features = alloc::vec![0.0; self.features.len()];
        for (src, dst) in self.features.chunks_exact(d).zip(features.chunks_exact_mut(d)) {
            f(src, dst);
        }
        Self { features, ..self.clone() }
    }
}

/// Maps label strings to `0..c` in order of first appearance.
pub fn encode_labels<S: AsRef<str>>(raw: &[S]) -> (Vec<usize>, Vec<String>) {
    let mut names: Vec<String> = Vec::new();
    let labels = raw
        .iter()
        .map(|s| {
            let s = s.as_ref();
            match names.iter().position(|n| n == s) {
                Some(idx) => idx,
                None => {
                    names.push(String::from(s));
                    names.len() - 1
                }
            }
        })
        .collect();
    (labels, names)
}

/// Replaces missing cells by their column mean over the present cells.
///
/// Present cells are copied unchanged. Returns the index of the first column
/// without any present value as the error.
pub fn impute_column_means(rows: &[Vec<Option<f64>>]) -> core::result::Result<Vec<Vec<f64>>, usize> {
    let d = rows.first().map_or(0, Vec::len);
    let mut means = Vec::with_capacity(d);
    for j in 0..d {
        let (sum, count) = rows
            .iter()
            .filter_map(|r| r[j])
            .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
        if count == 0 {
            return Err(j);
        }
        means.push(sum / count as f64);
    }
    Ok(rows
        .iter()
        .map(|r| r.iter().zip(&means).map(|(v, m)| v.unwrap_or(*m)).collect())
        .collect())
}

/// Per-feature affine standardization `(x - mean) / std`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Standardizer {
    means: Vec<f64>,
    std_devs: Vec<f64>,
}

impl Standardizer {
    /// Fits population mean and standard deviation over `rows`.
    /// Constant features get a standard deviation of 1.
    pub fn fit(data: &Dataset, rows: &[usize]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Config("cannot fit a standardizer on zero rows".into()));
        }
        let n = rows.len() as f64;
        let d = data.n_features();
        let mut means = Vec::with_capacity(d);
        let mut std_devs = Vec::with_capacity(d);
        for j in 0..d {
            let mean = data.column(j, rows).sum::<f64>() / n;
            let var = data.column(j, rows).map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            let sd = libm::sqrt(var);
            means.push(mean);
            std_devs.push(if sd > 0.0 && sd.is_finite() { sd } else { 1.0 });
        }
        Ok(Self { means, std_devs })
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn std_devs(&self) -> &[f64] {
        &self.std_devs
    }

    pub fn transform_row(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.means.iter().zip(&self.std_devs))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn inverse_row(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.means.iter().zip(&self.std_devs))
            .map(|(v, (m, s))| v * s + m)
            .collect()
    }

    /// Converts a difference vector in standardized units back to original units.
    pub fn inverse_delta(&self, delta: &[f64]) -> Vec<f64> {
        delta.iter().zip(&self.std_devs).map(|(v, s)| v * s).collect()
    }

    pub fn transform(&self, data: &Dataset) -> Dataset {
        data.map_rows(|src, dst| {
            for (j, (v, out)) in src.iter().zip(dst.iter_mut()).enumerate() {
                *out = (v - self.means[j]) / self.std_devs[j];
            }
        })
    }
}

/// Disjoint train / calibration / test row indices for one fold.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FoldSplit {
    pub train: Vec<usize>,
    pub calib: Vec<usize>,
    pub test: Vec<usize>,
}

/// Shuffled k-fold split where each fold's non-test rows are further divided
/// into a training part and a calibration part of `calib_fraction`.
pub fn split_folds(
    n_samples: usize,
    n_folds: usize,
    calib_fraction: f64,
    seed: u64,
) -> Result<Vec<FoldSplit>> {
    if n_folds < 2 {
        return Err(Error::Config(format!("n_folds must be at least 2, got {n_folds}")));
    }
    if !(calib_fraction > 0.0 && calib_fraction < 1.0) {
        return Err(Error::Config(format!("calib_fraction must lie in (0, 1), got {calib_fraction}")));
    }
    if n_samples < n_folds {
        return Err(Error::Config(format!("{n_samples} rows cannot form {n_folds} folds")));
    }

    let mut order: Vec<usize> = (0..n_samples).collect();
    order.shuffle(&mut rng_for(seed, &[0x5f01d]));

    let base = n_samples / n_folds;
    let extra = n_samples % n_folds;
    let mut splits = Vec::with_capacity(n_folds);
    let mut start = 0;
    for fold in 0..n_folds {
        let size = base + usize::from(fold < extra);
        let mut test: Vec<usize> = order[start..start + size].to_vec();
        let mut rest: Vec<usize> =
            order[..start].iter().chain(&order[start + size..]).copied().collect();
        start += size;

        rest.shuffle(&mut rng_for(seed, &[0xca1b, fold as u64]));
        let n_calib = libm::round(calib_fraction * rest.len() as f64) as usize;
        if n_calib == 0 || n_calib >= rest.len() {
            return Err(Error::Config(format!(
                "fold {fold}: {} non-test rows are too few for a calibration fraction of {calib_fraction}",
                rest.len()
            )));
        }
        let mut calib = rest.split_off(rest.len() - n_calib);
        let mut train = rest;
        train.sort_unstable();
        calib.sort_unstable();
        test.sort_unstable();
        splits.push(FoldSplit { train, calib, test });
    }
    Ok(splits)
}

/// Single shuffled train / calibration split over all rows (no test rows).
pub fn split_train_calib(n_samples: usize, calib_fraction: f64, seed: u64) -> Result<FoldSplit> {
    if !(calib_fraction > 0.0 && calib_fraction < 1.0) {
        return Err(Error::Config(format!("calib_fraction must lie in (0, 1), got {calib_fraction}")));
    }
    let mut order: Vec<usize> = (0..n_samples).collect();
    order.shuffle(&mut rng_for(seed, &[0xca1b, u64::MAX]));
    let n_calib = libm::round(calib_fraction * n_samples as f64) as usize;
    if n_calib == 0 || n_calib >= n_samples {
        return Err(Error::Config(format!(
            "{n_samples} rows are too few for a calibration fraction of {calib_fraction}"
        )));
    }
    let mut calib = order.split_off(n_samples - n_calib);
    let mut train = order;
    train.sort_unstable();
    calib.sort_unstable();
    Ok(FoldSplit { train, calib, test: Vec::new() })
}
