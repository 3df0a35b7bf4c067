//! Nelder–Mead downhill simplex over a subset of free coordinates.
//!
//! The semifactual loss contains indicator terms and piecewise-constant
//! certainty values, so the solver only ever compares objective values.
//! Coordinates listed as frozen never move from their starting value.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::rng_for;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct SimplexConfig {
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
    /// Iteration budget per start.
    pub max_iter: usize,
    /// Stop once every vertex is within this (max-norm) distance of the best.
    pub x_tol: f64,
    /// Stop once the spread of vertex values drops below this.
    pub f_tol: f64,
    /// Offset of the initial simplex vertices along each free axis.
    pub initial_step: f64,
    /// Number of starts. The first uses the axis-aligned simplex at `x0`;
    /// later ones restart from the incumbent with randomly scaled and signed
    /// axis offsets.
    pub n_restarts: usize,
    /// Set by the caller from its own seed; not part of user configuration.
    #[cfg_attr(feature = "serde", serde(skip))]
    pub seed: u64,
}

impl Default for SimplexConfig {
    fn default() -> Self {
        Self {
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
            max_iter: 500,
            x_tol: 1e-6,
            f_tol: 1e-9,
            initial_step: 0.5,
            n_restarts: 3,
            seed: 0,
        }
    }
}

impl SimplexConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.reflection > 0.0
            && self.expansion > 1.0
            && self.contraction > 0.0
            && self.contraction < 1.0
            && self.shrink > 0.0
            && self.shrink < 1.0
            && self.max_iter >= 1
            && self.n_restarts >= 1
            && self.initial_step > 0.0
            && self.x_tol >= 0.0
            && self.f_tol >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid simplex settings: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OptimResult {
    pub x_best: Vec<f64>,
    pub f_best: f64,
    pub n_evals: usize,
    /// Some start met a tolerance before exhausting its iteration budget.
    pub converged: bool,
}

/// Minimizes `objective` starting at `x0`, keeping `frozen` coordinates fixed.
pub fn minimize<F>(objective: F, x0: &[f64], config: &SimplexConfig, frozen: &[usize]) -> Result<OptimResult>
where
    F: FnMut(&[f64]) -> f64,
{
    minimize_traced(objective, x0, config, frozen, |_, _, _| {})
}

/// [`minimize`] reporting `(start, iteration, best value)` after every iteration.
pub fn minimize_traced<F, T>(
    mut objective: F,
    x0: &[f64],
    config: &SimplexConfig,
    frozen: &[usize],
    mut trace: T,
) -> Result<OptimResult>
where
    F: FnMut(&[f64]) -> f64,
    T: FnMut(usize, usize, f64),
{
    config.validate()?;
    if let Some(&bad) = frozen.iter().find(|&&i| i >= x0.len()) {
        return Err(Error::Config(format!("frozen index {bad} out of range for dimension {}", x0.len())));
    }
    let free: Vec<usize> = (0..x0.len()).filter(|i| !frozen.contains(i)).collect();

    let mut full = x0.to_vec();
    let mut n_evals = 0usize;
    let mut eval = |z: &[f64]| -> f64 {
        for (&i, &v) in free.iter().zip(z) {
            full[i] = v;
        }
        n_evals += 1;
        let f = objective(&full);
        if f.is_finite() {
            f
        } else {
            f64::INFINITY
        }
    };

    let start: Vec<f64> = free.iter().map(|&i| x0[i]).collect();
    let f0 = eval(&start);
    if !f0.is_finite() {
        return Err(Error::NonFiniteStart);
    }

    let mut best = (start, f0);
    let mut converged = free.is_empty();
    if !free.is_empty() {
        let mut rng = rng_for(config.seed, &[0x51e7]);
        for run in 0..config.n_restarts {
            let offsets: Vec<f64> = if run == 0 {
                vec![config.initial_step; free.len()]
            } else {
                (0..free.len())
                    .map(|_| {
                        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                        sign * config.initial_step * rng.random_range(0.5..1.5)
                    })
                    .collect()
            };
            let (x, f, done) = run_simplex(&mut eval, &best, &offsets, config, |it, f| trace(run, it, f));
            converged |= done;
            if f < best.1 {
                best = (x, f);
            }
        }
    }

    let (z_best, _) = best;
    let mut x_best = x0.to_vec();
    for (&i, &v) in free.iter().zip(&z_best) {
        x_best[i] = v;
    }
    // re-evaluate so f_best is exactly the objective at x_best
    let f_best = objective(&x_best);
    n_evals += 1;
    Ok(OptimResult { x_best, f_best, n_evals, converged })
}

struct Vertex {
    x: Vec<f64>,
    f: f64,
}

fn run_simplex<E, T>(
    eval: &mut E,
    start: &(Vec<f64>, f64),
    offsets: &[f64],
    cfg: &SimplexConfig,
    mut trace: T,
) -> (Vec<f64>, f64, bool)
where
    E: FnMut(&[f64]) -> f64,
    T: FnMut(usize, f64),
{
    let m = start.0.len();
    let mut simplex: Vec<Vertex> = Vec::with_capacity(m + 1);
    simplex.push(Vertex { x: start.0.clone(), f: start.1 });
    for (i, off) in offsets.iter().enumerate() {
        let mut x = start.0.clone();
        x[i] += off;
        let f = eval(&x);
        simplex.push(Vertex { x, f });
    }

    let mut centroid = vec![0.0; m];
    let point = |c: &[f64], toward: &[f64], t: f64| -> Vec<f64> {
        c.iter().zip(toward).map(|(ci, ti)| ci + t * (ti - ci)).collect()
    };

    let mut converged = false;
    for iter in 0..cfg.max_iter {
        simplex.sort_by(|a, b| a.f.total_cmp(&b.f));
        let f_lo = simplex[0].f;
        let f_hi = simplex[m].f;
        trace(iter, f_lo);

        let spread = f_hi - f_lo;
        let diameter = simplex[1..]
            .iter()
            .flat_map(|v| v.x.iter().zip(&simplex[0].x).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if (spread.is_finite() && spread < cfg.f_tol) || diameter < cfg.x_tol {
            converged = true;
            break;
        }

        centroid.iter_mut().for_each(|c| *c = 0.0);
        for v in &simplex[..m] {
            for (c, xi) in centroid.iter_mut().zip(&v.x) {
                *c += xi;
            }
        }
        centroid.iter_mut().for_each(|c| *c /= m as f64);

        let worst = &simplex[m];
        let xr = point(&centroid, &worst.x, -cfg.reflection);
        let fr = eval(&xr);

        if fr < f_lo {
            let xe = point(&centroid, &xr, cfg.expansion);
            let fe = eval(&xe);
            simplex[m] = if fe < fr { Vertex { x: xe, f: fe } } else { Vertex { x: xr, f: fr } };
            continue;
        }
        if fr < simplex[m - 1].f {
            simplex[m] = Vertex { x: xr, f: fr };
            continue;
        }

        let (xc, fc, accept) = if fr < simplex[m].f {
            let xc = point(&centroid, &xr, cfg.contraction);
            let fc = eval(&xc);
            (xc, fc, fc <= fr)
        } else {
            let xc = point(&centroid, &simplex[m].x, cfg.contraction);
            let fc = eval(&xc);
            (xc, fc, fc < simplex[m].f)
        };
        if accept {
            simplex[m] = Vertex { x: xc, f: fc };
            continue;
        }

        let (head, tail) = simplex.split_at_mut(1);
        for v in tail.iter_mut() {
            v.x = point(&head[0].x, &v.x, cfg.shrink);
            v.f = eval(&v.x);
        }
    }

    simplex.sort_by(|a, b| a.f.total_cmp(&b.f));
    let best = simplex.swap_remove(0);
    (best.x, best.f, converged)
}
