//! Semifactual explanations of rejects.
//!
//! A semifactual of a rejected input `x` is a point `x_sf` that is still
//! rejected, is at least as certain as `x`, changes few features, and lies
//! far from `x`. It is found by minimizing
//!
//! ```text
//! L(x_sf) = C_feas * max(r(x_sf) - theta, 0) + C_sf * max(r(x) - r(x_sf), 0)   (feasibility)
//!         + C_simple * max(#changed - mu, 0)                                   (sparsity)
//!         - C_sim * ||x_sf - x||_2                                             (distance reward)
//!         + C_div * #{j in F : feature j changed}                              (diversity)
//! ```
//!
//! Diverse sets are built sequentially: every new semifactual may not touch
//! the features already used by earlier ones (the blacklist `F`). Blacklisted
//! coordinates are frozen in the optimizer on top of the penalty, so members
//! of one set never share a changed feature.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use crate::conformal::RejectOption;
use crate::error::{Error, Result};
use crate::optimize::{minimize, OptimResult, SimplexConfig};
use crate::rng::derive_seed;

/// Weights of the loss terms and the feature budget `mu`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct LossWeights {
    pub c_feasibility: f64,
    pub c_sf: f64,
    pub c_simple: f64,
    pub c_similarity: f64,
    pub c_diverse: f64,
    /// Features that may change before the sparsity penalty applies.
    pub mu: usize,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { c_feasibility: 10.0, c_sf: 5.0, c_simple: 2.0, c_similarity: 1.0, c_diverse: 10.0, mu: 1 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let weights = [self.c_feasibility, self.c_sf, self.c_simple, self.c_similarity, self.c_diverse];
        if weights.iter().all(|w| *w > 0.0 && w.is_finite()) && self.mu >= 1 {
            Ok(())
        } else {
            Err(Error::Config(alloc::format!("loss weights must be positive and mu >= 1: {self:?}")))
        }
    }
}

/// Feature indices barred from further changes.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct BlacklistSet(BTreeSet<usize>);

impl BlacklistSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.0.contains(&j)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn extend(&mut self, features: impl IntoIterator<Item = usize>) {
        self.0.extend(features);
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.0.is_subset(&other.0)
    }
}

impl FromIterator<usize> for BlacklistSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

/// Indices with `|delta_i| > eps`.
pub fn changed_features(delta: &[f64], eps: f64) -> Vec<usize> {
    delta.iter().enumerate().filter(|(_, d)| d.abs() > eps).map(|(i, _)| i).collect()
}

/// Feasibility hinge: still rejected, and no less certain than the original.
pub fn loss_feas_sf(r_sf: f64, r_x: f64, theta: f64, w: &LossWeights) -> f64 {
    w.c_feasibility * (r_sf - theta).max(0.0) + w.c_sf * (r_x - r_sf).max(0.0)
}

/// Penalty for changing more than `mu` features.
pub fn loss_simple(delta: &[f64], w: &LossWeights, eps: f64) -> f64 {
    let changed = delta.iter().filter(|d| d.abs() > eps).count();
    w.c_simple * changed.saturating_sub(w.mu) as f64
}

/// Negative Euclidean length of the change.
pub fn loss_similarity(delta: &[f64], w: &LossWeights) -> f64 {
    -w.c_similarity * libm::sqrt(delta.iter().map(|d| d * d).sum::<f64>())
}

/// Penalty per blacklisted feature that changed.
pub fn loss_diverse(delta: &[f64], blacklist: &BlacklistSet, w: &LossWeights, eps: f64) -> f64 {
    let hits = blacklist.iter().filter(|&j| delta.get(j).is_some_and(|d| d.abs() > eps)).count();
    w.c_diverse * hits as f64
}

/// Number of features changed by both explanations.
pub fn diversity_overlap(delta_a: &[f64], delta_b: &[f64], eps: f64) -> Result<usize> {
    if delta_a.len() != delta_b.len() {
        return Err(Error::DimensionMismatch { expected: delta_a.len(), got: delta_b.len() });
    }
    Ok(delta_a.iter().zip(delta_b).filter(|(a, b)| a.abs() > eps && b.abs() > eps).count())
}

/// The individual loss terms at one candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LossTerms {
    pub feas_sf: f64,
    pub simple: f64,
    pub similarity: f64,
    pub diverse: f64,
    /// Certainty of the candidate.
    pub certainty: f64,
}

impl LossTerms {
    pub fn total(&self) -> f64 {
        self.feas_sf + self.diverse + self.similarity + self.simple
    }
}

/// The semifactual objective around a fixed input; the input's certainty is
/// computed once at construction.
pub struct SemifactualLoss<'a, R: ?Sized> {
    rejector: &'a R,
    x: &'a [f64],
    r_x: f64,
    theta: f64,
    blacklist: &'a BlacklistSet,
    weights: LossWeights,
    change_epsilon: f64,
}

impl<'a, R: RejectOption + ?Sized> SemifactualLoss<'a, R> {
    pub fn new(
        rejector: &'a R,
        x: &'a [f64],
        blacklist: &'a BlacklistSet,
        weights: LossWeights,
        change_epsilon: f64,
    ) -> Result<Self> {
        let r_x = rejector.certainty(x)?;
        Self::with_certainty(rejector, x, r_x, blacklist, weights, change_epsilon)
    }

    fn with_certainty(
        rejector: &'a R,
        x: &'a [f64],
        r_x: f64,
        blacklist: &'a BlacklistSet,
        weights: LossWeights,
        change_epsilon: f64,
    ) -> Result<Self> {
        if x.len() != rejector.n_features() {
            return Err(Error::DimensionMismatch { expected: rejector.n_features(), got: x.len() });
        }
        let theta = rejector.threshold()?;
        Ok(Self { rejector, x, r_x, theta, blacklist, weights, change_epsilon })
    }

    pub fn original_certainty(&self) -> f64 {
        self.r_x
    }

    /// Evaluates all terms with exactly one certainty query.
    pub fn terms(&self, x_sf: &[f64]) -> Result<LossTerms> {
        if x_sf.len() != self.x.len() {
            return Err(Error::DimensionMismatch { expected: self.x.len(), got: x_sf.len() });
        }
        let delta: Vec<f64> = x_sf.iter().zip(self.x).map(|(a, b)| a - b).collect();
        let r_sf = self.rejector.certainty(x_sf)?;
        let w = &self.weights;
        Ok(LossTerms {
            feas_sf: loss_feas_sf(r_sf, self.r_x, self.theta, w),
            simple: loss_simple(&delta, w, self.change_epsilon),
            similarity: loss_similarity(&delta, w),
            diverse: loss_diverse(&delta, self.blacklist, w, self.change_epsilon),
            certainty: r_sf,
        })
    }

    pub fn evaluate(&self, x_sf: &[f64]) -> Result<f64> {
        self.terms(x_sf).map(|t| t.total())
    }
}

/// One-shot evaluation of the full loss.
pub fn total_loss<R: RejectOption + ?Sized>(
    x_sf: &[f64],
    x: &[f64],
    rejector: &R,
    blacklist: &BlacklistSet,
    weights: &LossWeights,
    change_epsilon: f64,
) -> Result<f64> {
    SemifactualLoss::new(rejector, x, blacklist, *weights, change_epsilon)?.evaluate(x_sf)
}

/// Settings for computing explanations.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct ExplainerConfig {
    pub weights: LossWeights,
    /// A feature counts as changed when `|delta_i|` exceeds this.
    pub change_epsilon: f64,
    /// Candidates are clamped to `x +- search_radius` per coordinate.
    pub search_radius: Option<f64>,
    /// When the optimum is infeasible, return the lowest-loss feasible
    /// candidate the optimizer evaluated instead.
    pub prefer_feasible: bool,
    /// Also run the simplex on single-feature lines and on the support of
    /// the incumbent.
    pub subspace_search: bool,
    pub optimizer: SimplexConfig,
}

impl Default for ExplainerConfig {
    fn default() -> Self {
        Self {
            weights: LossWeights::default(),
            change_epsilon: 1e-6,
            search_radius: Some(3.0),
            prefer_feasible: true,
            subspace_search: true,
            optimizer: SimplexConfig::default(),
        }
    }
}

impl ExplainerConfig {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        self.optimizer.validate()?;
        if !(self.change_epsilon >= 0.0 && self.change_epsilon.is_finite()) {
            return Err(Error::Config("change_epsilon must be a non-negative number".into()));
        }
        if let Some(r) = self.search_radius {
            if !(r > 0.0) {
                return Err(Error::Config("search_radius must be positive".into()));
            }
        }
        Ok(())
    }

    fn clamp_into(&self, x: &[f64], z: &[f64], out: &mut [f64]) {
        for ((o, &zi), &xi) in out.iter_mut().zip(z).zip(x) {
            *o = match self.search_radius {
                Some(r) => zi.clamp(xi - r, xi + r),
                None => zi,
            };
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Semifactual {
    pub x_sf: Vec<f64>,
    /// `x_sf - x`.
    pub delta: Vec<f64>,
    pub credibility_sf: f64,
    /// Still rejected and at least as certain as the original.
    pub feasible: bool,
    pub changed_features: Vec<usize>,
    pub loss: f64,
    pub n_evals: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExplanationSet {
    pub original_x: Vec<f64>,
    pub credibility_x: f64,
    pub theta: f64,
    pub k: usize,
    pub semifactuals: Vec<Semifactual>,
    /// Blacklist in effect when each semifactual was computed.
    pub blacklist_trace: Vec<BlacklistSet>,
    /// Stopped before `k` because every feature was blacklisted.
    pub truncated: bool,
}

impl ExplanationSet {
    pub fn n_features(&self) -> usize {
        self.original_x.len()
    }
}

/// Single semifactual of a rejected input with `blacklist` frozen.
pub fn compute_semifactual<R: RejectOption + ?Sized>(
    x: &[f64],
    blacklist: &BlacklistSet,
    rejector: &R,
    config: &ExplainerConfig,
) -> Result<Semifactual> {
    config.validate()?;
    let r_x = rejector.certainty(x)?;
    if !(r_x < rejector.threshold()?) {
        return Err(Error::NotRejected);
    }
    solve(x, r_x, blacklist, rejector, config)
}

fn solve<R: RejectOption + ?Sized>(
    x: &[f64],
    r_x: f64,
    blacklist: &BlacklistSet,
    rejector: &R,
    config: &ExplainerConfig,
) -> Result<Semifactual> {
    let loss = SemifactualLoss::with_certainty(rejector, x, r_x, blacklist, config.weights, config.change_epsilon)?;
    let theta = rejector.threshold()?;
    if let Some(bad) = blacklist.iter().find(|&j| j >= x.len()) {
        return Err(Error::Config(alloc::format!("blacklisted feature {bad} out of range")));
    }
    let frozen: Vec<usize> = blacklist.iter().collect();

    let feasible = |r: f64| r < theta && r >= r_x;
    let mut buf = x.to_vec();
    // lowest-loss feasible candidate seen so far
    let mut fallback: Option<(f64, Vec<f64>)> = None;
    let mut objective = |z: &[f64]| {
        config.clamp_into(x, z, &mut buf);
        match loss.terms(&buf) {
            Ok(t) => {
                let total = t.total();
                if config.prefer_feasible
                    && feasible(t.certainty)
                    && fallback.as_ref().is_none_or(|(f, _)| total < *f)
                {
                    fallback = Some((total, buf.clone()));
                }
                total
            }
            Err(_) => f64::NAN,
        }
    };
    let mut result = minimize(&mut objective, x, &config.optimizer, &frozen)?;
    if config.subspace_search {
        result = subspace_search(&mut objective, x, result, blacklist, config)?;
    }

    let mut x_sf = x.to_vec();
    config.clamp_into(x, &result.x_best, &mut x_sf);
    let mut terms = loss.terms(&x_sf)?;
    if !feasible(terms.certainty) {
        if let Some((_, candidate)) = fallback {
            x_sf = candidate;
            terms = loss.terms(&x_sf)?;
        }
    }
    // sub-epsilon moves count as unchanged; make them exactly zero
    let snapped: Vec<f64> = x_sf
        .iter()
        .zip(x)
        .map(|(&a, &b)| if libm::fabs(a - b) < config.change_epsilon { b } else { a })
        .collect();
    if snapped != x_sf {
        let t = loss.terms(&snapped)?;
        if feasible(t.certainty) || !feasible(terms.certainty) {
            x_sf = snapped;
            terms = t;
        }
    }
    let delta: Vec<f64> = x_sf.iter().zip(x).map(|(a, b)| a - b).collect();
    let credibility_sf = terms.certainty;
    Ok(Semifactual {
        changed_features: changed_features(&delta, config.change_epsilon),
        feasible: feasible(credibility_sf),
        x_sf,
        delta,
        credibility_sf,
        loss: terms.total(),
        n_evals: result.n_evals,
        converged: result.converged,
    })
}

/// Extra simplex runs on low-dimensional faces of the search space.
///
/// The sparsity term makes the loss jump whenever another feature leaves
/// zero, so a full-dimensional simplex rarely slides along a single axis.
/// This runs the simplex along every free feature in both directions with
/// all other coordinates pinned, grows the best support one feature at a time
/// up to `mu` features, polishes on the final support, and keeps the overall
/// best point.
fn subspace_search<F: FnMut(&[f64]) -> f64>(
    objective: &mut F,
    x: &[f64],
    mut best: OptimResult,
    blacklist: &BlacklistSet,
    config: &ExplainerConfig,
) -> Result<OptimResult> {
    let d = x.len();
    let free: Vec<usize> = (0..d).filter(|&j| !blacklist.contains(j)).collect();
    if free.len() < 2 {
        return Ok(best);
    }
    let mut n_evals = best.n_evals;
    let mut stream = 0u64;
    let mut mirrored = x.to_vec();
    // simplex over `keep` from `start`, with feature `flip` walked backwards
    let mut run = |keep: &[usize], start: &[f64], flip: Option<usize>, best: &mut OptimResult| -> Result<bool> {
        stream += 1;
        let mut opt = config.optimizer.clone();
        opt.seed = derive_seed(config.optimizer.seed, stream);
        let pinned: Vec<usize> = (0..d).filter(|j| !keep.contains(j)).collect();
        let mirror = |z: &[f64], out: &mut [f64]| {
            out.copy_from_slice(z);
            if let Some(j) = flip {
                out[j] = 2.0 * start[j] - z[j];
            }
        };
        let mut r = minimize(
            |z: &[f64]| {
                mirror(z, &mut mirrored);
                objective(&mirrored)
            },
            start,
            &opt,
            &pinned,
        )?;
        let mut back = r.x_best.clone();
        mirror(&r.x_best, &mut back);
        r.x_best = back;
        n_evals += r.n_evals;
        let improved = r.f_best < best.f_best;
        if improved {
            *best = r;
        }
        Ok(improved)
    };

    // the first simplex step fixes the direction, so walk both ways
    for &j in &free {
        run(&[j], x, None, &mut best)?;
        run(&[j], x, Some(j), &mut best)?;
    }

    let support_of = |p: &[f64]| {
        let mut z = x.to_vec();
        config.clamp_into(x, p, &mut z);
        let delta: Vec<f64> = z.iter().zip(x).map(|(a, b)| a - b).collect();
        changed_features(&delta, config.change_epsilon)
    };
    let mut support = support_of(&best.x_best);
    while !support.is_empty() && support.len() < config.weights.mu.min(free.len()) {
        let start = best.x_best.clone();
        let mut grown = false;
        for &j in free.iter().filter(|j| !support.contains(j)) {
            let mut keep = support.clone();
            keep.push(j);
            grown |= run(&keep, &start, None, &mut best)?;
            grown |= run(&keep, &start, Some(j), &mut best)?;
        }
        let next = support_of(&best.x_best);
        if !grown || next.len() <= support.len() {
            break;
        }
        support = next;
    }

    if support.len() > 1 && support.len() < free.len() {
        let start = best.x_best.clone();
        run(&support, &start, None, &mut best)?;
    }
    best.n_evals = n_evals;
    Ok(best)
}

/// Up to `k` semifactuals with pairwise disjoint changed features.
pub fn compute_diverse_semifactuals<R: RejectOption + ?Sized>(
    x: &[f64],
    k: usize,
    rejector: &R,
    config: &ExplainerConfig,
) -> Result<ExplanationSet> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    config.validate()?;
    let theta = rejector.threshold()?;
    let r_x = rejector.certainty(x)?;
    if !(r_x < theta) {
        return Err(Error::NotRejected);
    }

    let d = x.len();
    let mut blacklist = BlacklistSet::new();
    let mut semifactuals = Vec::with_capacity(k);
    let mut trace = Vec::with_capacity(k);
    let mut truncated = false;
    for step in 0..k {
        if blacklist.len() >= d {
            truncated = true;
            break;
        }
        let mut step_config = config.clone();
        step_config.optimizer.seed = derive_seed(config.optimizer.seed, step as u64);
        let sf = solve(x, r_x, &blacklist, rejector, &step_config)?;
        trace.push(blacklist.clone());
        blacklist.extend(sf.changed_features.iter().copied());
        semifactuals.push(sf);
    }
    Ok(ExplanationSet {
        original_x: x.to_vec(),
        credibility_x: r_x,
        theta,
        k,
        semifactuals,
        blacklist_trace: trace,
        truncated,
    })
}
