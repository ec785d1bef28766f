//! Discrete-time dynamics `x[j+1] = f_j(x[j], u[j])` and the bundled models.
//!
//! Models expose the one-step map and its two Jacobians. The trait methods
//! assume correctly sized inputs; [`SystemModel::checked_step`] and
//! [`rollout`] validate dimensions and finiteness.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};

/// Default central-difference step for Jacobian checks.
pub const DEFAULT_FD_STEP: f64 = 1e-6;

/// One-step dynamics with Jacobians.
///
/// `j` is the time index; time-invariant models ignore it.
pub trait SystemModel: Send + Sync {
    /// State dimension `m`.
    fn state_dim(&self) -> usize;

    /// Control dimension per time step.
    fn control_dim(&self) -> usize;

    fn step(&self, j: usize, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64>;

    /// Derivative of `step` with respect to the state, `m x m`.
    fn jac_x(&self, j: usize, x: &DVector<f64>, u: &DVector<f64>) -> DMatrix<f64>;

    /// Derivative of `step` with respect to the control, `m x control_dim`.
    fn jac_u(&self, j: usize, x: &DVector<f64>, u: &DVector<f64>) -> DMatrix<f64>;

    /// `step` with dimension and finiteness checks on inputs and output.
    fn checked_step(&self, j: usize, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        check_dims(self.state_dim(), self.control_dim(), x, u)?;
        let next = self.step(j, x, u);
        if next.iter().all(|v| v.is_finite()) {
            Ok(next)
        } else {
            Err(Error::Divergence { step: j })
        }
    }
}

fn check_dims(m: usize, q: usize, x: &DVector<f64>, u: &DVector<f64>) -> Result<()> {
    if x.len() != m {
        return Err(invalid(format!("state has length {}, model expects {m}", x.len())));
    }
    if u.len() != q {
        return Err(invalid(format!("control has length {}, model expects {q}", u.len())));
    }
    if !x.iter().chain(u.iter()).all(|v| v.is_finite()) {
        return Err(invalid("state and control entries must be finite"));
    }
    Ok(())
}

/// Systems of the form `x[j+1] = f(x[j]) + B u[j]`.
///
/// Every `ControlAffine` type is a [`SystemModel`] with `jac_u` equal to the
/// constant input matrix.
pub trait ControlAffine: Send + Sync {
    fn state_dim(&self) -> usize;

    /// Drift map `f`.
    fn drift(&self, x: &DVector<f64>) -> DVector<f64>;

    /// Jacobian `f'(x)`.
    fn drift_jacobian(&self, x: &DVector<f64>) -> DMatrix<f64>;

    /// Constant input matrix `B`, `m x control_dim`.
    fn input_matrix(&self) -> &DMatrix<f64>;
}

impl<T: ControlAffine> SystemModel for T {
    fn state_dim(&self) -> usize {
        ControlAffine::state_dim(self)
    }

    fn control_dim(&self) -> usize {
        self.input_matrix().ncols()
    }

    fn step(&self, _j: usize, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        self.drift(x) + self.input_matrix() * u
    }

    fn jac_x(&self, _j: usize, x: &DVector<f64>, _u: &DVector<f64>) -> DMatrix<f64> {
        self.drift_jacobian(x)
    }

    fn jac_u(&self, _j: usize, _x: &DVector<f64>, _u: &DVector<f64>) -> DMatrix<f64> {
        self.input_matrix().clone()
    }
}

/// Forward-Euler pendulum with friction:
/// `phi'' + alpha phi' + beta sin(phi) = u`.
#[derive(Debug, Clone)]
pub struct PendulumModel {
    pub alpha: f64,
    pub beta: f64,
    pub h_step: f64,
    input: DMatrix<f64>,
}

impl PendulumModel {
    pub fn new(alpha: f64, beta: f64, h_step: f64) -> Result<Self> {
        if !(alpha.is_finite() && beta.is_finite() && h_step.is_finite()) {
            return Err(invalid("pendulum parameters must be finite"));
        }
        Ok(Self {
            alpha,
            beta,
            h_step,
            input: DMatrix::from_column_slice(2, 1, &[0.0, 1.0]),
        })
    }

    /// One Euler step with dimension checks.
    pub fn pendulum_step(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        self.checked_step(0, x, u)
    }

    /// State Jacobian with dimension checks.
    pub fn pendulum_jac_x(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        if x.len() != 2 {
            return Err(invalid(format!("pendulum state has length {}, expected 2", x.len())));
        }
        Ok(self.drift_jacobian(x))
    }
}

impl ControlAffine for PendulumModel {
    fn state_dim(&self) -> usize {
        2
    }

    fn drift(&self, x: &DVector<f64>) -> DVector<f64> {
        let (phi, psi) = (x[0], x[1]);
        let h = self.h_step;
        DVector::from_vec(vec![
            phi + h * psi,
            psi + h * (-self.alpha * psi - self.beta * phi.sin()),
        ])
    }

    fn drift_jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let h = self.h_step;
        DMatrix::from_row_slice(
            2,
            2,
            &[1.0, h, -h * self.beta * x[0].cos(), 1.0 - h * self.alpha],
        )
    }

    fn input_matrix(&self) -> &DMatrix<f64> {
        &self.input
    }
}

/// `x[j+1] = A x[j] + B u[j]`.
#[derive(Debug, Clone)]
pub struct LinearModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
}

impl LinearModel {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        if !a.is_square() {
            return Err(invalid(format!("A must be square, got {}x{}", a.nrows(), a.ncols())));
        }
        if b.nrows() != a.nrows() || b.ncols() == 0 {
            return Err(invalid(format!(
                "B must be {}xq with q >= 1, got {}x{}",
                a.nrows(),
                b.nrows(),
                b.ncols()
            )));
        }
        if !a.iter().chain(b.iter()).all(|v| v.is_finite()) {
            return Err(invalid("A and B entries must be finite"));
        }
        Ok(Self { a, b })
    }
}

impl ControlAffine for LinearModel {
    fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    fn drift(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.a * x
    }

    fn drift_jacobian(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        self.a.clone()
    }

    fn input_matrix(&self) -> &DMatrix<f64> {
        &self.b
    }
}

/// Forward-Euler Van der Pol oscillator, `x1'' - mu (1 - x1^2) x1' + x1 = u`.
#[derive(Debug, Clone)]
pub struct VanDerPolModel {
    pub mu: f64,
    pub h_step: f64,
    input: DMatrix<f64>,
}

impl VanDerPolModel {
    pub fn new(mu: f64, h_step: f64) -> Result<Self> {
        if !(mu.is_finite() && h_step.is_finite()) {
            return Err(invalid("Van der Pol parameters must be finite"));
        }
        Ok(Self {
            mu,
            h_step,
            input: DMatrix::from_column_slice(2, 1, &[0.0, 1.0]),
        })
    }
}

impl ControlAffine for VanDerPolModel {
    fn state_dim(&self) -> usize {
        2
    }

    fn drift(&self, x: &DVector<f64>) -> DVector<f64> {
        let h = self.h_step;
        DVector::from_vec(vec![
            x[0] + h * x[1],
            x[1] + h * (self.mu * (1.0 - x[0] * x[0]) * x[1] - x[0]),
        ])
    }

    fn drift_jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let h = self.h_step;
        DMatrix::from_row_slice(
            2,
            2,
            &[
                1.0,
                h,
                h * (-2.0 * self.mu * x[0] * x[1] - 1.0),
                1.0 + h * self.mu * (1.0 - x[0] * x[0]),
            ],
        )
    }

    fn input_matrix(&self) -> &DMatrix<f64> {
        &self.input
    }
}

/// Forward-Euler damped Duffing oscillator,
/// `x1'' + delta x1' + alpha x1 + beta x1^3 = u`.
#[derive(Debug, Clone)]
pub struct DuffingModel {
    pub delta: f64,
    pub alpha: f64,
    pub beta: f64,
    pub h_step: f64,
    input: DMatrix<f64>,
}

impl DuffingModel {
    pub fn new(delta: f64, alpha: f64, beta: f64, h_step: f64) -> Result<Self> {
        if ![delta, alpha, beta, h_step].iter().all(|v| v.is_finite()) {
            return Err(invalid("Duffing parameters must be finite"));
        }
        Ok(Self {
            delta,
            alpha,
            beta,
            h_step,
            input: DMatrix::from_column_slice(2, 1, &[0.0, 1.0]),
        })
    }
}

impl ControlAffine for DuffingModel {
    fn state_dim(&self) -> usize {
        2
    }

    fn drift(&self, x: &DVector<f64>) -> DVector<f64> {
        let h = self.h_step;
        let accel = -self.delta * x[1] - self.alpha * x[0] - self.beta * x[0].powi(3);
        DVector::from_vec(vec![x[0] + h * x[1], x[1] + h * accel])
    }

    fn drift_jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let h = self.h_step;
        DMatrix::from_row_slice(
            2,
            2,
            &[
                1.0,
                h,
                -h * (self.alpha + 3.0 * self.beta * x[0] * x[0]),
                1.0 - h * self.delta,
            ],
        )
    }

    fn input_matrix(&self) -> &DMatrix<f64> {
        &self.input
    }
}

/// Simulates `controls.len()` steps from `x0`, returning all `N + 1` states.
pub fn rollout<M: SystemModel + ?Sized>(
    model: &M,
    x0: &DVector<f64>,
    controls: &[DVector<f64>],
) -> Result<Vec<DVector<f64>>> {
    let mut trajectory = Vec::with_capacity(controls.len() + 1);
    trajectory.push(x0.clone());
    let mut x = x0.clone();
    for (j, u) in controls.iter().enumerate() {
        x = model.checked_step(j, &x, u)?;
        trajectory.push(x.clone());
    }
    Ok(trajectory)
}

/// Central-difference approximations of `(jac_x, jac_u)` at `(j, x, u)`.
pub fn finite_diff_jacobians<M: SystemModel + ?Sized>(
    model: &M,
    j: usize,
    x: &DVector<f64>,
    u: &DVector<f64>,
    fd_step: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if !(fd_step > 0.0 && fd_step.is_finite()) {
        return Err(invalid(format!("finite-difference step must be positive, got {fd_step}")));
    }
    let m = model.state_dim();
    let q = model.control_dim();
    check_dims(m, q, x, u)?;

    let mut jx = DMatrix::zeros(m, m);
    for c in 0..m {
        let mut plus = x.clone();
        let mut minus = x.clone();
        plus[c] += fd_step;
        minus[c] -= fd_step;
        let diff = (model.checked_step(j, &plus, u)? - model.checked_step(j, &minus, u)?)
            / (2.0 * fd_step);
        jx.set_column(c, &diff);
    }

    let mut ju = DMatrix::zeros(m, q);
    for c in 0..q {
        let mut plus = u.clone();
        let mut minus = u.clone();
        plus[c] += fd_step;
        minus[c] -= fd_step;
        let diff = (model.checked_step(j, x, &plus)? - model.checked_step(j, x, &minus)?)
            / (2.0 * fd_step);
        ju.set_column(c, &diff);
    }
    Ok((jx, ju))
}

/// `max |a - b| / max |b|`, the matrix-level relative error used by all
/// Jacobian checks. Falls back to the absolute error when `b` is zero.
pub fn max_relative_error(actual: &DMatrix<f64>, reference: &DMatrix<f64>) -> f64 {
    let diff = (actual - reference).amax();
    let scale = reference.amax();
    if scale > 0.0 {
        diff / scale
    } else {
        diff
    }
}
