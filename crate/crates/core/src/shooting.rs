//! Single shooting: the boundary-value problem as the under-determined
//! equation `P(u) = x[N](u) - target = 0`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::dynamics::{rollout, SystemModel};
use crate::error::{invalid, Result};

/// An equation `P(u) = 0` with `P: R^n -> R^m`, as consumed by the Newton
/// drivers.
pub trait ResidualMap {
    fn n_equations(&self) -> usize;

    fn n_unknowns(&self) -> usize;

    fn residual(&self, u: &DVector<f64>) -> Result<DVector<f64>>;

    /// Residual and Jacobian from a single evaluation.
    fn residual_and_jacobian(&self, u: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)>;
}

/// The whole control sequence as one vector; `u[j]` occupies entries
/// `j*q .. (j+1)*q`.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedControl {
    entries: DVector<f64>,
    control_dim: usize,
}

impl StackedControl {
    pub fn new(entries: DVector<f64>, control_dim: usize) -> Result<Self> {
        if control_dim == 0 || !entries.len().is_multiple_of(control_dim) {
            return Err(invalid(format!(
                "stacked control of length {} is not a multiple of control dimension {control_dim}",
                entries.len()
            )));
        }
        Ok(Self { entries, control_dim })
    }

    pub fn zeros(control_dim: usize, horizon: usize) -> Self {
        Self { entries: DVector::zeros(control_dim * horizon), control_dim }
    }

    pub fn from_samples(samples: &[DVector<f64>]) -> Result<Self> {
        let q = samples.first().map_or(0, |s| s.len());
        if samples.iter().any(|s| s.len() != q) {
            return Err(invalid("control samples have inconsistent lengths"));
        }
        let entries = DVector::from_iterator(
            q * samples.len(),
            samples.iter().flat_map(|s| s.iter().copied()),
        );
        Ok(Self { entries, control_dim: q.max(1) })
    }

    pub fn horizon(&self) -> usize {
        self.entries.len() / self.control_dim
    }

    pub fn control_dim(&self) -> usize {
        self.control_dim
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.entries
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.entries
    }

    pub fn sample(&self, j: usize) -> DVector<f64> {
        self.entries.rows(j * self.control_dim, self.control_dim).into_owned()
    }

    pub fn unstack(&self) -> Vec<DVector<f64>> {
        (0..self.horizon()).map(|j| self.sample(j)).collect()
    }
}

/// A terminal residual value with its cached infinity norm.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualValue {
    pub entries: DVector<f64>,
    pub inf_norm: f64,
}

impl ResidualValue {
    pub fn new(entries: DVector<f64>) -> Self {
        let inf_norm = entries.amax();
        Self { entries, inf_norm }
    }
}

/// `P'(u)` as `[Q_{N-1}, ..., Q_1, Q_0]`; the block for `u[j]` occupies
/// columns `j*q .. (j+1)*q`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShootingJacobian {
    pub matrix: DMatrix<f64>,
    pub control_dim: usize,
}

impl ShootingJacobian {
    /// Derivative of `x[N]` with respect to `u[j]`.
    pub fn block(&self, j: usize) -> DMatrix<f64> {
        self.matrix.columns(j * self.control_dim, self.control_dim).into_owned()
    }
}

/// Drive `model` from `x0` to `target` in `horizon` steps.
#[derive(Clone)]
pub struct ShootingProblem {
    pub model: Arc<dyn SystemModel>,
    pub x0: DVector<f64>,
    pub target: DVector<f64>,
    pub horizon: usize,
}

impl std::fmt::Debug for ShootingProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ShootingProblem")
            .field("state_dim", &self.model.state_dim())
            .field("control_dim", &self.model.control_dim())
            .field("x0", &self.x0.as_slice())
            .field("target", &self.target.as_slice())
            .field("horizon", &self.horizon)
            .finish()
    }
}

impl ShootingProblem {
    pub fn new(
        model: Arc<dyn SystemModel>,
        x0: DVector<f64>,
        target: DVector<f64>,
        horizon: usize,
    ) -> Result<Self> {
        let m = model.state_dim();
        if x0.len() != m || target.len() != m {
            return Err(invalid(format!(
                "x0 and target must have length {m}, got {} and {}",
                x0.len(),
                target.len()
            )));
        }
        if horizon == 0 {
            return Err(invalid("horizon must be at least 1"));
        }
        if !x0.iter().chain(target.iter()).all(|v| v.is_finite()) {
            return Err(invalid("x0 and target must be finite"));
        }
        Ok(Self { model, x0, target, horizon })
    }

    pub fn state_dim(&self) -> usize {
        self.model.state_dim()
    }

    pub fn control_dim(&self) -> usize {
        self.model.control_dim()
    }

    /// Number of unknowns `n = control_dim * horizon`.
    pub fn n(&self) -> usize {
        self.control_dim() * self.horizon
    }

    fn samples(&self, u: &DVector<f64>) -> Result<Vec<DVector<f64>>> {
        if u.len() != self.n() {
            return Err(invalid(format!(
                "stacked control has length {}, expected {}",
                u.len(),
                self.n()
            )));
        }
        Ok(StackedControl::new(u.clone(), self.control_dim())?.unstack())
    }

    /// Full trajectory `x[0..=N]` under the stacked control `u`.
    pub fn trajectory(&self, u: &DVector<f64>) -> Result<Vec<DVector<f64>>> {
        rollout(self.model.as_ref(), &self.x0, &self.samples(u)?)
    }

    pub fn residual(&self, u: &DVector<f64>) -> Result<ResidualValue> {
        let traj = self.trajectory(u)?;
        Ok(ResidualValue::new(&traj[self.horizon] - &self.target))
    }

    /// Residual and `P'(u)` from one rollout and one backward pass.
    pub fn jacobian(&self, u: &DVector<f64>) -> Result<(ResidualValue, ShootingJacobian)> {
        let samples = self.samples(u)?;
        let traj = rollout(self.model.as_ref(), &self.x0, &samples)?;
        let m = self.state_dim();
        let q = self.control_dim();
        let mut matrix = DMatrix::zeros(m, self.n());
        // acc = d x[N] / d x[j+1]
        let mut acc = DMatrix::<f64>::identity(m, m);
        for j in (0..self.horizon).rev() {
            let ju = self.model.jac_u(j, &traj[j], &samples[j]);
            matrix.columns_mut(j * q, q).copy_from(&(&acc * ju));
            acc = &acc * self.model.jac_x(j, &traj[j], &samples[j]);
        }
        let residual = ResidualValue::new(&traj[self.horizon] - &self.target);
        Ok((residual, ShootingJacobian { matrix, control_dim: q }))
    }
}

impl ResidualMap for ShootingProblem {
    fn n_equations(&self) -> usize {
        self.state_dim()
    }

    fn n_unknowns(&self) -> usize {
        self.n()
    }

    fn residual(&self, u: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(ShootingProblem::residual(self, u)?.entries)
    }

    fn residual_and_jacobian(&self, u: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let (r, jac) = self.jacobian(u)?;
        Ok((r.entries, jac.matrix))
    }
}

/// Central-difference approximation of `P'(u)`, one column per unknown.
pub fn finite_diff_jacobian<P: ResidualMap + ?Sized>(
    map: &P,
    u: &DVector<f64>,
    fd_step: f64,
) -> Result<DMatrix<f64>> {
    if !(fd_step > 0.0 && fd_step.is_finite()) {
        return Err(invalid(format!("finite-difference step must be positive, got {fd_step}")));
    }
    let mut out = DMatrix::zeros(map.n_equations(), map.n_unknowns());
    for c in 0..map.n_unknowns() {
        let mut plus = u.clone();
        let mut minus = u.clone();
        plus[c] += fd_step;
        minus[c] -= fd_step;
        let col = (map.residual(&plus)? - map.residual(&minus)?) / (2.0 * fd_step);
        out.set_column(c, &col);
    }
    Ok(out)
}
