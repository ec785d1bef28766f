#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparsectl::config::ProblemConfig;
use sparsectl::dynamics::SystemModel;
use sparsectl::shooting::ShootingProblem;

pub fn pendulum_config_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/pendulum.json")
}

pub fn pendulum_config() -> ProblemConfig {
    ProblemConfig::load(&pendulum_config_path(), &[]).unwrap()
}

pub fn pendulum_problem() -> ShootingProblem {
    pendulum_config().problem().unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-scale..scale))
}

pub fn uniform_vector(rng: &mut ChaCha8Rng, len: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(len, |_, _| rng.random_range(-scale..scale))
}

/// `x+ = x + h (tanh(W x) + c) + h B tanh(u)`, smooth and bounded in every
/// argument.
#[derive(Debug, Clone)]
pub struct SmoothModel {
    pub w: DMatrix<f64>,
    pub c: DVector<f64>,
    pub b: DMatrix<f64>,
    pub h: f64,
}

impl SmoothModel {
    pub fn random(rng: &mut ChaCha8Rng, m: usize, q: usize) -> Self {
        Self {
            w: uniform_matrix(rng, m, m, 1.5),
            c: uniform_vector(rng, m, 0.5),
            b: uniform_matrix(rng, m, q, 1.0),
            h: rng.random_range(0.05..0.3),
        }
    }
}

fn sech2(v: &DVector<f64>) -> DVector<f64> {
    v.map(|t| 1.0 - t.tanh().powi(2))
}

impl SystemModel for SmoothModel {
    fn state_dim(&self) -> usize {
        self.w.nrows()
    }

    fn control_dim(&self) -> usize {
        self.b.ncols()
    }

    fn step(&self, _j: usize, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let drift = (&self.w * x).map(f64::tanh) + &self.c;
        x + (drift + &self.b * u.map(f64::tanh)) * self.h
    }

    fn jac_x(&self, _j: usize, x: &DVector<f64>, _u: &DVector<f64>) -> DMatrix<f64> {
        let d = DMatrix::from_diagonal(&sech2(&(&self.w * x)));
        DMatrix::identity(x.len(), x.len()) + d * &self.w * self.h
    }

    fn jac_u(&self, _j: usize, _x: &DVector<f64>, u: &DVector<f64>) -> DMatrix<f64> {
        &self.b * DMatrix::from_diagonal(&sech2(u)) * self.h
    }
}

/// Random smooth problem whose target is reached by a small random control,
/// so a solution exists near the origin.
pub fn solvable_problem(rng: &mut ChaCha8Rng, m: usize, q: usize, horizon: usize) -> ShootingProblem {
    let model = Arc::new(SmoothModel::random(rng, m, q));
    let x0 = uniform_vector(rng, m, 1.0);
    let reference = uniform_vector(rng, q * horizon, 0.3);
    let probe = ShootingProblem::new(model.clone(), x0.clone(), DVector::zeros(m), horizon).unwrap();
    let target = probe.trajectory(&reference).unwrap()[horizon].clone();
    ShootingProblem::new(model, x0, target, horizon).unwrap()
}

/// Per-block product `A_{N-1} ... A_{j+1} B_j`, folded left to right.
pub fn naive_jacobian(problem: &ShootingProblem, model: &dyn SystemModel, u: &DVector<f64>) -> DMatrix<f64> {
    let traj = problem.trajectory(u).unwrap();
    let (m, q) = (model.state_dim(), model.control_dim());
    let n_steps = traj.len() - 1;
    let sample = |j: usize| DVector::from_column_slice(&u.as_slice()[j * q..(j + 1) * q]);
    let mut out = DMatrix::zeros(m, q * n_steps);
    for j in 0..n_steps {
        let mut prod = DMatrix::<f64>::identity(m, m);
        for i in (j + 1..n_steps).rev() {
            prod = &prod * model.jac_x(i, &traj[i], &sample(i));
        }
        let block = &prod * model.jac_u(j, &traj[j], &sample(j));
        out.columns_mut(j * q, q).copy_from(&block);
    }
    out
}
