//! Newton drivers for under-determined equations `P(u) = 0`.
//!
//! Each iteration solves the linearisation `P'(u^k) w = P(u^k)` for the
//! minimal-norm direction `w^k` and steps `u^{k+1} = u^k - gamma_k w^k`.
//! With l1 directions every step adds at most `m` nonzero components, so
//! iterates started from zero stay sparse.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::lsolve::{
    count_nonzero, min_norm_direction, DirectionNorm, DirectionStatus,
    DirectionSubproblem,
};
use crate::shooting::ResidualMap;

/// Step-size rule `gamma_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepPolicy {
    /// `gamma = 1`.
    Pure,
    /// `gamma = min(1, mu^2 / (L p_k))`.
    FixedMuL { mu: f64, l_const: f64 },
    /// `gamma = min(1, p_k / (L ||w||_1^2))`.
    FixedL { l_const: f64 },
    /// Backtracking on `beta` without knowledge of `mu` or `L`.
    /// `beta0 = None` starts from the initial residual norm.
    Adaptive { beta0: Option<f64>, shrink: f64 },
}

impl StepPolicy {
    fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(format!("{name} must be positive and finite, got {v}")))
            }
        };
        match *self {
            StepPolicy::Pure => Ok(()),
            StepPolicy::FixedMuL { mu, l_const } => {
                positive("mu", mu)?;
                positive("L_const", l_const)
            }
            StepPolicy::FixedL { l_const } => positive("L_const", l_const),
            StepPolicy::Adaptive { beta0, shrink } => {
                if let Some(b) = beta0 {
                    positive("beta0", b)?;
                }
                if shrink > 0.0 && shrink < 1.0 {
                    Ok(())
                } else {
                    Err(invalid(format!("shrink must lie in (0, 1), got {shrink}")))
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub policy: StepPolicy,
    pub direction_norm: DirectionNorm,
    /// Stop once `||P(u^k)||_inf <= eps`.
    pub eps: f64,
    pub max_iterations: usize,
    /// Shrinks allowed per adaptive step before reporting a stall.
    pub max_backtracks: usize,
    /// Starting point; `None` means the zero vector.
    pub u0: Option<DVector<f64>>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            policy: StepPolicy::Adaptive { beta0: None, shrink: 0.5 },
            direction_norm: DirectionNorm::L1,
            eps: 1e-9,
            max_iterations: 100,
            max_backtracks: 60,
            u0: None,
        }
    }
}

impl SolverConfig {
    pub fn pure_l1() -> Self {
        Self { policy: StepPolicy::Pure, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        self.policy.validate()?;
        if !(self.eps > 0.0) {
            return Err(invalid(format!("eps must be positive, got {}", self.eps)));
        }
        if self.max_iterations == 0 {
            return Err(invalid("max_iterations must be at least 1"));
        }
        if self.max_backtracks == 0 {
            return Err(invalid("max_backtracks must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    /// Iteration over the full control vector.
    Full,
    /// Iteration over the frozen support during refinement.
    Reduced,
}

/// One accepted Newton step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    /// `||P(u^k)||_inf` before the step.
    pub p_k: f64,
    pub gamma: f64,
    pub step_l1_norm: f64,
    pub direction_support: Vec<usize>,
    /// Nonzero count of `u^{k+1}`.
    pub nnz_u: usize,
    /// Adaptive `beta` after the step.
    pub beta_k: Option<f64>,
    pub backtracks: usize,
    pub stage: Stage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    Stalled,
    SingularLinearization,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub u_final: DVector<f64>,
    pub status: SolveStatus,
    pub residual_inf: f64,
    /// `sum_j ||u[j]||_1`.
    pub u_l1_norm: f64,
    /// Total nonzero components of the control.
    pub u_nnz: usize,
    pub history: Vec<IterationRecord>,
}

impl SolveResult {
    fn new(u: DVector<f64>, status: SolveStatus, residual_inf: f64, history: Vec<IterationRecord>) -> Self {
        Self {
            u_l1_norm: u.lp_norm(1),
            u_nnz: count_nonzero(&u),
            u_final: u,
            status,
            residual_inf,
            history,
        }
    }

    pub fn iterations(&self) -> usize {
        self.history.len()
    }

    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }
}

/// `min{1, mu^2 / (L p_k)}`.
pub fn step_size_mu_l(mu: f64, l_const: f64, p_k: f64) -> f64 {
    (mu * mu / (l_const * p_k)).min(1.0)
}

/// `min{1, p_k / (L ||w||^2)}` with the l1 norm of the direction. A zero
/// direction yields a unit step.
pub fn step_size_l(l_const: f64, p_k: f64, w_l1_norm: f64) -> f64 {
    if w_l1_norm == 0.0 {
        return 1.0;
    }
    (p_k / (l_const * w_l1_norm * w_l1_norm)).min(1.0)
}

fn inf_norm(v: &DVector<f64>) -> f64 {
    v.amax()
}

/// Runs the configured Newton iteration on `map` until `||P||_inf <= eps`,
/// the iteration budget runs out, or a step cannot be produced.
pub fn solve<P: ResidualMap + ?Sized>(map: &P, config: &SolverConfig) -> Result<SolveResult> {
    config.validate()?;
    let n = map.n_unknowns();
    let mut u = match &config.u0 {
        Some(u0) if u0.len() != n => {
            return Err(invalid(format!("u0 has length {}, expected {n}", u0.len())));
        }
        Some(u0) => u0.clone(),
        None => DVector::zeros(n),
    };

    let mut p = inf_norm(&map.residual(&u)?);
    let mut beta = match config.policy {
        StepPolicy::Adaptive { beta0, .. } => beta0.unwrap_or(p),
        _ => f64::NAN,
    };
    let mut history = Vec::new();

    while p > config.eps {
        let k = history.len();
        if k >= config.max_iterations {
            return Ok(SolveResult::new(u, SolveStatus::MaxIterations, p, history));
        }

        let (r, jac) = map.residual_and_jacobian(&u)?;
        let dir = min_norm_direction(&DirectionSubproblem::new(jac, r)?, config.direction_norm)?;
        if dir.status == DirectionStatus::Infeasible {
            return Ok(SolveResult::new(u, SolveStatus::SingularLinearization, p, history));
        }
        let w = dir.w;
        let w_l1 = w.lp_norm(1);
        if w_l1 == 0.0 {
            return Ok(SolveResult::new(u, SolveStatus::Stalled, p, history));
        }

        let (gamma, next, p_next, backtracks) = match config.policy {
            StepPolicy::Pure => commit(map, &u, &w, 1.0)?,
            StepPolicy::FixedMuL { mu, l_const } => {
                commit(map, &u, &w, step_size_mu_l(mu, l_const, p))?
            }
            StepPolicy::FixedL { l_const } => commit(map, &u, &w, step_size_l(l_const, p, w_l1))?,
            StepPolicy::Adaptive { shrink, .. } => {
                match adaptive_step(map, &u, &w, p, &mut beta, shrink, config.max_backtracks) {
                    Some(step) => step,
                    None => return Ok(SolveResult::new(u, SolveStatus::Stalled, p, history)),
                }
            }
        };

        u = next;
        history.push(IterationRecord {
            k,
            p_k: p,
            gamma,
            step_l1_norm: w_l1,
            direction_support: dir.support,
            nnz_u: count_nonzero(&u),
            beta_k: matches!(config.policy, StepPolicy::Adaptive { .. }).then_some(beta),
            backtracks,
            stage: Stage::Full,
        });
        p = p_next;
    }
    Ok(SolveResult::new(u, SolveStatus::Converged, p, history))
}

type Step = (f64, DVector<f64>, f64, usize);

fn commit<P: ResidualMap + ?Sized>(map: &P, u: &DVector<f64>, w: &DVector<f64>, gamma: f64) -> Result<Step> {
    let next = u - w * gamma;
    let p_next = inf_norm(&map.residual(&next)?);
    Ok((gamma, next, p_next, 0))
}

/// Backtracking loop of the adaptive rule. Returns `None` when
/// `max_backtracks` shrinks did not produce an acceptable trial point.
fn adaptive_step<P: ResidualMap + ?Sized>(
    map: &P,
    u: &DVector<f64>,
    w: &DVector<f64>,
    p: f64,
    beta: &mut f64,
    shrink: f64,
    max_backtracks: usize,
) -> Option<Step> {
    let mut backtracks = 0;
    loop {
        let gamma = (*beta / p).min(1.0);
        let trial = u - w * gamma;
        // A trial that leaves the domain of the dynamics counts as a rejection.
        let p_trial = map.residual(&trial).map(|r| inf_norm(&r)).unwrap_or(f64::INFINITY);
        let accepted = if *beta < p {
            p_trial < p - *beta / 2.0
        } else {
            p_trial < p * p / (2.0 * *beta)
        };
        if accepted {
            return Some((gamma, trial, p_trial, backtracks));
        }
        if backtracks >= max_backtracks {
            return None;
        }
        *beta *= shrink;
        backtracks += 1;
    }
}

/// `P` restricted to the coordinates in `support`; all other coordinates of
/// the full control are held at zero.
pub struct ReducedMap<'a, P: ResidualMap + ?Sized> {
    inner: &'a P,
    support: Vec<usize>,
}

impl<'a, P: ResidualMap + ?Sized> ReducedMap<'a, P> {
    pub fn new(inner: &'a P, support: Vec<usize>) -> Result<Self> {
        let n = inner.n_unknowns();
        if support.is_empty() || support.iter().any(|&i| i >= n) {
            return Err(invalid("support must be non-empty and within the control length"));
        }
        Ok(Self { inner, support })
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn embed(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut u = DVector::zeros(self.inner.n_unknowns());
        for (&i, &x) in self.support.iter().zip(v.iter()) {
            u[i] = x;
        }
        u
    }

    pub fn restrict(&self, u: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.support.len(), self.support.iter().map(|&i| u[i]))
    }
}

impl<P: ResidualMap + ?Sized> ResidualMap for ReducedMap<'_, P> {
    fn n_equations(&self) -> usize {
        self.inner.n_equations()
    }

    fn n_unknowns(&self) -> usize {
        self.support.len()
    }

    fn residual(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.inner.residual(&self.embed(v))
    }

    fn residual_and_jacobian(&self, v: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let (r, jac) = self.inner.residual_and_jacobian(&self.embed(v))?;
        Ok((r, jac.select_columns(self.support.iter())))
    }
}

/// Support refinement: a few l1 Newton probes from zero reveal a support,
/// then the equation is solved on that support alone.
///
/// The probe uses `config.policy` with l1 directions for `probe_steps`
/// iterations. The reduced solve uses the adaptive rule (shrink taken from
/// `config` when it is adaptive, 0.5 otherwise) with l2 directions, starting
/// from the probe iterate, and stops at `refine_eps`.
pub fn refine_support<P: ResidualMap + ?Sized>(
    map: &P,
    config: &SolverConfig,
    probe_steps: usize,
    refine_eps: f64,
) -> Result<SolveResult> {
    config.validate()?;
    if probe_steps == 0 {
        return Err(invalid("probe_steps must be at least 1"));
    }
    if !(refine_eps > 0.0) {
        return Err(invalid(format!("refine_eps must be positive, got {refine_eps}")));
    }

    let probe_cfg = SolverConfig {
        direction_norm: DirectionNorm::L1,
        max_iterations: probe_steps,
        u0: None,
        ..config.clone()
    };
    let probe = solve(map, &probe_cfg)?;
    if probe.history.is_empty() {
        // Either already solved at zero or the first linearisation failed.
        return Ok(probe);
    }

    let mut union: Vec<usize> =
        probe.history.iter().flat_map(|r| r.direction_support.iter().copied()).collect();
    union.sort_unstable();
    union.dedup();

    let reduced = ReducedMap::new(map, union)?;
    let shrink = match config.policy {
        StepPolicy::Adaptive { shrink, .. } => shrink,
        _ => 0.5,
    };
    let reduced_cfg = SolverConfig {
        policy: StepPolicy::Adaptive { beta0: None, shrink },
        direction_norm: DirectionNorm::L2,
        eps: refine_eps,
        max_iterations: config.max_iterations,
        max_backtracks: config.max_backtracks,
        u0: Some(reduced.restrict(&probe.u_final)),
    };
    let inner = solve(&reduced, &reduced_cfg)?;

    let offset = probe.history.len();
    let mut history = probe.history;
    history.extend(inner.history.into_iter().map(|mut rec| {
        rec.k += offset;
        rec.direction_support = rec.direction_support.iter().map(|&i| reduced.support()[i]).collect();
        rec.stage = Stage::Reduced;
        rec
    }));
    let u = reduced.embed(&inner.u_final);
    Ok(SolveResult::new(u, inner.status, inner.residual_inf, history))
}
