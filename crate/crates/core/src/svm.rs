//! Linear SVM training for pairwise preference constraints.
//!
//! The ranking problem is
//!
//! ```text
//! min_w  ½‖w‖² + C Σ_k max(0, 1 − w·δ_k)    subject to  w_i ≥ w_min, i ∈ B
//! ```
//!
//! where each `δ_k = Φ(d_i, q) − Φ(d_j, q)`. The default solver works on the
//! dual: `w = Σ α_k δ_k + μ` with `0 ≤ α_k ≤ C` and `μ_i ≥ 0` supported on the
//! bounded dimensions, and maximizes `Σ α_k + w_min Σ μ_i − ½‖w‖²` one
//! coordinate at a time. Each coordinate step has a closed form, and a `μ_i`
//! step is exactly the projection of `w_i` onto `[w_min, ∞)`.

use std::ops::Range;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::SparseVector;
use crate::seed::rng_for;

pub const DEFAULT_C: f64 = 1.0;
pub const DEFAULT_W_MIN: f64 = 1.0;
pub const DEFAULT_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_MAX_ITERS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    /// Dual coordinate ascent; `max_iters` counts passes over all coordinates.
    DualCoordinate,
    /// Projected subgradient on the primal; `max_iters` counts steps.
    ProjectedSubgradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainStatus {
    Converged,
    /// The iteration budget ran out before the stationarity test passed.
    MaxIterations,
    /// Binary training saw a single class; the model is bias only.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub c: f64,
    pub w_min: f64,
    /// Dimensions held at or above `w_min`.
    pub bounded: Range<usize>,
    pub tolerance: f64,
    pub max_iters: usize,
    pub solver: SolverKind,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            c: DEFAULT_C,
            w_min: DEFAULT_W_MIN,
            bounded: 0..0,
            tolerance: DEFAULT_TOLERANCE,
            max_iters: DEFAULT_MAX_ITERS,
            solver: SolverKind::DualCoordinate,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub weights: Vec<f64>,
    pub iterations: usize,
    pub objective: f64,
    pub status: TrainStatus,
    /// Constraints actually used (zero deltas removed).
    pub constraints: usize,
    pub dropped: usize,
}

fn check_dims(dim: usize, constraints: &[SparseVector]) -> Result<()> {
    match constraints.iter().map(SparseVector::min_dim).max() {
        Some(needed) if needed > dim => Err(Error::DimensionMismatch {
            expected: dim,
            got: needed,
        }),
        _ => Ok(()),
    }
}

/// `½‖w‖² + C Σ max(0, 1 − w·δ)`.
pub fn objective(w: &[f64], constraints: &[SparseVector], c: f64) -> Result<f64> {
    check_dims(w.len(), constraints)?;
    Ok(objective_unchecked(w, constraints, c))
}

fn objective_unchecked(w: &[f64], constraints: &[SparseVector], c: f64) -> f64 {
    let reg: f64 = 0.5 * w.iter().map(|x| x * x).sum::<f64>();
    let loss: f64 = constraints.iter().map(|d| (1.0 - d.dot_dense(w)).max(0.0)).sum();
    reg + c * loss
}

/// A subgradient of [`objective`]: `w − C Σ_{margin < 1} δ`. At a kink the
/// zero element of the hinge subdifferential is taken.
pub fn subgradient(w: &[f64], constraints: &[SparseVector], c: f64) -> Result<Vec<f64>> {
    check_dims(w.len(), constraints)?;
    Ok(subgradient_unchecked(w, constraints, c))
}

fn subgradient_unchecked(w: &[f64], constraints: &[SparseVector], c: f64) -> Vec<f64> {
    let mut g = w.to_vec();
    for d in constraints {
        if d.dot_dense(w) < 1.0 {
            for &(id, v) in d.entries() {
                g[id as usize] -= c * v;
            }
        }
    }
    g
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlackReport {
    pub slacks: Vec<f64>,
    pub total: f64,
    /// Constraints with `ξ ≥ 1`, i.e. preferences the weights get wrong.
    pub violations: usize,
}

pub fn slack_report(w: &[f64], constraints: &[SparseVector]) -> SlackReport {
    let slacks: Vec<f64> = constraints.iter().map(|d| (1.0 - d.dot_dense(w)).max(0.0)).collect();
    SlackReport {
        total: slacks.iter().sum(),
        violations: slacks.iter().filter(|&&s| s >= 1.0).count(),
        slacks,
    }
}

/// Train the bounded ranking SVM over a `dim`-dimensional space.
pub fn train_ranking(constraints: &[SparseVector], dim: usize, options: &TrainOptions) -> Result<Solution> {
    if options.c.is_nan() || options.c <= 0.0 {
        return Err(Error::Config(format!("C must be positive, got {}", options.c)));
    }
    if options.bounded.end > dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: options.bounded.end,
        });
    }
    check_dims(dim, constraints)?;
    let kept: Vec<SparseVector> = constraints.iter().filter(|d| !d.is_zero()).cloned().collect();
    let dropped = constraints.len() - kept.len();
    if dropped > 0 {
        log::warn!("dropped {dropped} preference constraints with identical feature vectors");
    }
    let (mut weights, iterations, converged) = match options.solver {
        SolverKind::DualCoordinate => dual_coordinate(&kept, dim, options),
        SolverKind::ProjectedSubgradient => projected_subgradient(&kept, dim, options),
    };
    // Exact feasibility regardless of rounding in the updates.
    for w in &mut weights[options.bounded.clone()] {
        if *w < options.w_min {
            *w = options.w_min;
        }
    }
    let status = if converged {
        TrainStatus::Converged
    } else {
        log::warn!(
            "solver stopped after {iterations} iterations without meeting tolerance {}",
            options.tolerance
        );
        TrainStatus::MaxIterations
    };
    Ok(Solution {
        objective: objective_unchecked(&weights, &kept, options.c),
        weights,
        iterations,
        status,
        constraints: kept.len(),
        dropped,
    })
}

fn dual_coordinate(constraints: &[SparseVector], dim: usize, options: &TrainOptions) -> (Vec<f64>, usize, bool) {
    // With the bounds folded into the dual, w(α) = clamp(Σ α δ) and each
    // coordinate step uses ‖δ‖² as a curvature bound.
    let c = options.c;
    let n = constraints.len();
    let floor = |i: usize| {
        if options.bounded.contains(&i) {
            options.w_min
        } else {
            f64::NEG_INFINITY
        }
    };
    let mut u = vec![0.0f64; dim];
    let mut w: Vec<f64> = (0..dim).map(|i| u[i].max(floor(i))).collect();
    let mut alpha = vec![0.0; n];
    let norms: Vec<f64> = constraints.iter().map(SparseVector::squared_norm).collect();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = rng_for(0, "svm/dual-coordinate");
    let mut epochs = 0;
    while epochs < options.max_iters {
        epochs += 1;
        order.shuffle(&mut rng);
        let mut max_violation: f64 = 0.0;
        for &k in &order {
            let d = &constraints[k];
            let g = 1.0 - d.dot_dense(&w);
            let pg = projected(g, alpha[k], c);
            max_violation = max_violation.max(pg.abs());
            if pg == 0.0 {
                continue;
            }
            let next = (alpha[k] + g / norms[k]).clamp(0.0, c);
            let step = next - alpha[k];
            if step != 0.0 {
                alpha[k] = next;
                for &(id, v) in d.entries() {
                    let i = id as usize;
                    u[i] += step * v;
                    w[i] = u[i].max(floor(i));
                }
            }
        }
        if max_violation < options.tolerance || relative_gap(&w, &u, &alpha, constraints, c) < options.tolerance {
            return (w, epochs, true);
        }
    }
    (w, epochs, false)
}

/// (P(w) − D(α)) / max(1, P(w)) with D(α) = Σα + ½‖w‖² − u·w.
fn relative_gap(w: &[f64], u: &[f64], alpha: &[f64], constraints: &[SparseVector], c: f64) -> f64 {
    let primal = objective_unchecked(w, constraints, c);
    let half_norm: f64 = w.iter().map(|x| x * x).sum::<f64>() / 2.0;
    let cross: f64 = w.iter().zip(u).map(|(a, b)| a * b).sum();
    let dual = alpha.iter().sum::<f64>() + half_norm - cross;
    (primal - dual) / primal.max(1.0)
}

/// Projected gradient of the dual in one box-constrained coordinate.
fn projected(g: f64, value: f64, upper: f64) -> f64 {
    if value <= 0.0 {
        g.max(0.0)
    } else if value >= upper {
        g.min(0.0)
    } else {
        g
    }
}

fn projected_subgradient(constraints: &[SparseVector], dim: usize, options: &TrainOptions) -> (Vec<f64>, usize, bool) {
    const WINDOW: usize = 100;
    let c = options.c;
    let project = |w: &mut Vec<f64>| {
        for x in &mut w[options.bounded.clone()] {
            *x = x.max(options.w_min);
        }
    };
    let max_norm = constraints.iter().map(SparseVector::squared_norm).fold(0.0, f64::max);
    let eta0 = if max_norm > 0.0 { 1.0 / (c * max_norm) } else { 1.0 };
    let mut w = vec![0.0; dim];
    project(&mut w);
    let mut best = w.clone();
    let mut best_obj = objective_unchecked(&w, constraints, c);
    let mut window_start_obj = best_obj;
    for t in 0..options.max_iters {
        let g = subgradient_unchecked(&w, constraints, c);
        let eta = eta0 / (1.0 + t as f64).sqrt();
        for (x, gi) in w.iter_mut().zip(&g) {
            *x -= eta * gi;
        }
        project(&mut w);
        let obj = objective_unchecked(&w, constraints, c);
        if obj < best_obj {
            best_obj = obj;
            best.clone_from(&w);
        }
        if (t + 1) % WINDOW == 0 {
            let change = (window_start_obj - best_obj).abs() / best_obj.abs().max(1e-12);
            if change < options.tolerance {
                return (best, t + 1, true);
            }
            window_start_obj = best_obj;
        }
    }
    (best, options.max_iters, false)
}

/// A linear decision function `w·x + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub status: TrainStatus,
}

impl LinearModel {
    pub fn new(weights: Vec<f64>, bias: f64) -> Self {
        LinearModel {
            weights,
            bias,
            status: TrainStatus::Converged,
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(vec![0.0; dim], 0.0)
    }

    pub fn decision(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.len(),
                got: x.len(),
            });
        }
        Ok(self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias)
    }

    pub fn predict(&self, x: &[f64]) -> Result<bool> {
        Ok(self.decision(x)? > 0.0)
    }
}

/// Objective minimized by [`train_binary`]: the bias is an extra regularized
/// coordinate, `½(‖w‖² + b²) + C Σ max(0, 1 − y(w·x + b))`.
pub fn binary_objective(model: &LinearModel, examples: &[(Vec<f64>, bool)], c: f64) -> f64 {
    let reg = 0.5 * (model.weights.iter().map(|x| x * x).sum::<f64>() + model.bias * model.bias);
    let loss: f64 = examples
        .iter()
        .map(|(x, label)| {
            let y = if *label { 1.0 } else { -1.0 };
            let score = model.decision(x).unwrap_or(0.0);
            (1.0 - y * score).max(0.0)
        })
        .sum();
    reg + c * loss
}

/// Hinge-loss linear classifier. Labels are `true` for the positive class.
pub fn train_binary(examples: &[(Vec<f64>, bool)], c: f64, tolerance: f64) -> Result<LinearModel> {
    let Some(first) = examples.first() else {
        return Err(Error::Config("no training examples".into()));
    };
    let dim = first.0.len();
    if let Some((x, _)) = examples.iter().find(|(x, _)| x.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: x.len(),
        });
    }
    let positives = examples.iter().filter(|(_, y)| *y).count();
    if positives == 0 || positives == examples.len() {
        return Ok(LinearModel {
            weights: vec![0.0; dim],
            bias: if positives == 0 { -1.0 } else { 1.0 },
            status: TrainStatus::Degenerate,
        });
    }
    let constraints: Vec<SparseVector> = examples
        .iter()
        .map(|(x, label)| {
            let y = if *label { 1.0 } else { -1.0 };
            SparseVector::from_pairs(
                x.iter()
                    .enumerate()
                    .map(|(i, v)| (i as u32, y * v))
                    .chain(std::iter::once((dim as u32, y))),
            )
        })
        .collect();
    let options = TrainOptions {
        c,
        tolerance,
        ..TrainOptions::default()
    };
    let solution = train_ranking(&constraints, dim + 1, &options)?;
    let mut weights = solution.weights;
    let bias = weights.pop().expect("bias coordinate");
    Ok(LinearModel {
        weights,
        bias,
        status: solution.status,
    })
}
