//! Minimal-norm solutions of under-determined linear systems `A w = r`.
//!
//! [`min_l1_direction`] solves `min ||w||_1` as a linear program over the
//! split `w = w+ - w-` and returns a basic (vertex) solution, so at most
//! `rows(A)` entries are nonzero. [`min_l2_direction`] is the pseudo-inverse
//! baseline and [`brute_force_l1`] enumerates supports for testing.

mod simplex;

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use simplex::{Columns, Outcome};


/// Feasibility tolerance, relative to `1 + ||r||_inf`.
pub const FEAS_TOL: f64 = 1e-9;

/// Entries at or below this magnitude count as zero in support and
/// sparsity accounting.
pub const ZERO_THRESHOLD: f64 = 1e-12;

/// Largest column count accepted by [`brute_force_l1`].
pub const BRUTE_FORCE_MAX_COLUMNS: usize = 12;

/// Indices of entries with magnitude above [`ZERO_THRESHOLD`].
pub fn support(w: &DVector<f64>) -> Vec<usize> {
    w.iter()
        .enumerate()
        .filter(|(_, v)| v.abs() > ZERO_THRESHOLD)
        .map(|(i, _)| i)
        .collect()
}

pub fn count_nonzero(w: &DVector<f64>) -> usize {
    w.iter().filter(|v| v.abs() > ZERO_THRESHOLD).count()
}

/// Norm minimised by the direction subproblem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DirectionNorm {
    L1,
    L2,
}

/// `A w = r` with `A` of size `m x n`.
#[derive(Debug, Clone)]
pub struct DirectionSubproblem {
    pub a: DMatrix<f64>,
    pub r: DVector<f64>,
}

impl DirectionSubproblem {
    /// Checks shapes and finiteness. `m > n` is accepted; such systems only
    /// have solutions when `r` lies in the column space of `A`.
    pub fn new(a: DMatrix<f64>, r: DVector<f64>) -> Result<Self> {
        if a.nrows() != r.len() {
            return Err(invalid(format!(
                "matrix has {} rows but right-hand side has length {}",
                a.nrows(),
                r.len()
            )));
        }
        if a.ncols() == 0 {
            return Err(invalid("matrix has no columns"));
        }
        if !a.iter().chain(r.iter()).all(|v| v.is_finite()) {
            return Err(invalid("subproblem entries must be finite"));
        }
        Ok(Self { a, r })
    }

    pub fn rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn cols(&self) -> usize {
        self.a.ncols()
    }

    fn feasibility_bound(&self) -> f64 {
        FEAS_TOL * (1.0 + self.r.amax())
    }

    /// `||A w - r||_inf`.
    pub fn violation(&self, w: &DVector<f64>) -> f64 {
        (&self.a * w - &self.r).amax()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirectionStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone)]
pub struct DirectionResult {
    pub w: DVector<f64>,
    /// `||w||_1` for the l1 solvers, `||w||_2` for the l2 solver.
    pub objective: f64,
    pub support: Vec<usize>,
    pub status: DirectionStatus,
    /// For infeasible results: how far the best attempt is from satisfying
    /// `A w = r` (Phase-I objective for the LP).
    pub infeasibility: Option<f64>,
}

impl DirectionResult {
    fn optimal(w: DVector<f64>, objective: f64) -> Self {
        let support = support(&w);
        Self { w, objective, support, status: DirectionStatus::Optimal, infeasibility: None }
    }

    fn infeasible(n: usize, residual: f64) -> Self {
        Self {
            w: DVector::zeros(n),
            objective: f64::NAN,
            support: Vec::new(),
            status: DirectionStatus::Infeasible,
            infeasibility: Some(residual),
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == DirectionStatus::Optimal
    }
}

/// `[A, -A]` with unit costs.
struct SplitColumns<'a> {
    a: &'a DMatrix<f64>,
}

impl Columns for SplitColumns<'_> {
    fn n_rows(&self) -> usize {
        self.a.nrows()
    }

    fn n_structural(&self) -> usize {
        2 * self.a.ncols()
    }

    fn column(&self, k: usize) -> DVector<f64> {
        let n = self.a.ncols();
        if k < n {
            self.a.column(k).into_owned()
        } else {
            -self.a.column(k - n).into_owned()
        }
    }

    fn cost(&self, _k: usize) -> f64 {
        1.0
    }
}

/// Vertex-optimal solution of `min ||w||_1  s.t.  A w = r`.
pub fn min_l1_direction(sub: &DirectionSubproblem) -> Result<DirectionResult> {
    let n = sub.cols();
    if sub.r.iter().all(|&v| v == 0.0) {
        return Ok(DirectionResult::optimal(DVector::zeros(n), 0.0));
    }
    let cols = SplitColumns { a: &sub.a };
    match simplex::solve(&cols, &sub.r, sub.feasibility_bound())? {
        Outcome::Infeasible { phase_one_residual } => {
            Ok(DirectionResult::infeasible(n, phase_one_residual))
        }
        Outcome::Optimal { basic } => {
            let mut w = DVector::zeros(n);
            for (k, value) in basic {
                if k < n {
                    w[k] += value;
                } else {
                    w[k - n] -= value;
                }
            }
            let objective = w.lp_norm(1);
            Ok(DirectionResult::optimal(w, objective))
        }
    }
}

/// Minimum-Euclidean-norm solution `A^+ r`.
///
/// Uses a QR factorisation of `A^T` when `A` has full row rank and falls back
/// to a truncated SVD otherwise.
pub fn min_l2_direction(sub: &DirectionSubproblem) -> Result<DirectionResult> {
    let (m, n) = (sub.rows(), sub.cols());
    if sub.r.iter().all(|&v| v == 0.0) {
        return Ok(DirectionResult::optimal(DVector::zeros(n), 0.0));
    }

    let w = if m <= n {
        let qr = sub.a.transpose().qr();
        let r = qr.r();
        let diag_max = r.diagonal().amax();
        let full_rank = (0..m).all(|i| r[(i, i)].abs() > 1e-12 * diag_max.max(f64::MIN_POSITIVE));
        if full_rank {
            // A = R^T Q^T, so w = Q R^{-T} r.
            let z = r
                .transpose()
                .solve_lower_triangular(&sub.r)
                .expect("triangular factor has a nonzero diagonal");
            Some(qr.q() * z)
        } else {
            None
        }
    } else {
        None
    };
    let w = match w {
        Some(w) => w,
        None => {
            let svd = sub.a.clone().svd(true, true);
            let cutoff = 1e-12 * svd.singular_values.amax();
            svd.solve(&sub.r, cutoff).map_err(|e| invalid(e.to_string()))?
        }
    };

    let violation = sub.violation(&w);
    if !(violation <= sub.feasibility_bound()) {
        return Ok(DirectionResult::infeasible(n, violation));
    }
    let objective = w.norm();
    Ok(DirectionResult::optimal(w, objective))
}

/// Exhaustive search over column subsets of size at most `m`; returns the
/// consistent basic solution with the least l1 norm.
pub fn brute_force_l1(sub: &DirectionSubproblem) -> Result<DirectionResult> {
    let (m, n) = (sub.rows(), sub.cols());
    if n > BRUTE_FORCE_MAX_COLUMNS {
        return Err(invalid(format!(
            "brute force is limited to {BRUTE_FORCE_MAX_COLUMNS} columns, got {n}"
        )));
    }
    if sub.r.iter().all(|&v| v == 0.0) {
        return Ok(DirectionResult::optimal(DVector::zeros(n), 0.0));
    }

    let bound = sub.feasibility_bound();
    let mut best: Option<(f64, DVector<f64>)> = None;
    for size in 1..=m.min(n) {
        for subset in (0..n).combinations(size) {
            let cols = sub.a.select_columns(subset.iter());
            let svd = cols.svd(true, true);
            let smax = svd.singular_values.amax();
            let smin = svd.singular_values.min();
            if smax == 0.0 || smin <= 1e-10 * smax {
                continue;
            }
            let Ok(local) = svd.solve(&sub.r, 0.0) else {
                continue;
            };
            let mut w = DVector::zeros(n);
            for (&c, &v) in subset.iter().zip(local.iter()) {
                w[c] = v;
            }
            if sub.violation(&w) > bound {
                continue;
            }
            let obj = w.lp_norm(1);
            if best.as_ref().is_none_or(|(b, _)| obj < *b) {
                best = Some((obj, w));
            }
        }
    }
    Ok(match best {
        Some((obj, w)) => DirectionResult::optimal(w, obj),
        None => DirectionResult::infeasible(n, f64::INFINITY),
    })
}

/// Dispatches on the requested norm.
pub fn min_norm_direction(sub: &DirectionSubproblem, norm: DirectionNorm) -> Result<DirectionResult> {
    match norm {
        DirectionNorm::L1 => min_l1_direction(sub),
        DirectionNorm::L2 => min_l2_direction(sub),
    }
}
