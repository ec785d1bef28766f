mod common;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use sparsectl::dynamics::{max_relative_error, LinearModel, SystemModel};
use sparsectl::shooting::{finite_diff_jacobian, ShootingProblem};

// Frozen from the first run of the pendulum rollout at u = 0.
const GOLDEN_TERMINAL: [f64; 2] = [0.17689258482929499, 0.4255144885648803];
const GOLDEN_S: f64 = 0.4255144885648803;

#[test]
fn pendulum_zero_control_golden() {
    let problem = common::pendulum_problem();
    let u = DVector::zeros(problem.n());
    let traj = problem.trajectory(&u).unwrap();
    let terminal = &traj[160];
    assert!((terminal[0] - GOLDEN_TERMINAL[0]).abs() <= 1e-12, "{}", terminal[0]);
    assert!((terminal[1] - GOLDEN_TERMINAL[1]).abs() <= 1e-12, "{}", terminal[1]);
    let s = problem.residual(&u).unwrap().inf_norm;
    assert!((s - GOLDEN_S).abs() <= 1e-12, "{s}");
}

#[test]
fn pendulum_jacobian_matches_fd() {
    let problem = common::pendulum_problem();
    let u = DVector::zeros(problem.n());
    let (_, jac) = problem.jacobian(&u).unwrap();
    let fd = finite_diff_jacobian(&problem, &u, 1e-6).unwrap();
    assert!(max_relative_error(&jac.matrix, &fd) <= 1e-5);
}

#[test]
fn linear_blocks_match_matrix_powers() {
    let mut rng = common::rng(7);
    for _ in 0..10 {
        let a = common::uniform_matrix(&mut rng, 3, 3, 1.0);
        let b = common::uniform_matrix(&mut rng, 3, 2, 1.0);
        let model = Arc::new(LinearModel::new(a.clone(), b.clone()).unwrap());
        let problem = ShootingProblem::new(model, DVector::zeros(3), DVector::zeros(3), 4).unwrap();
        let u = common::uniform_vector(&mut rng, 8, 1.0);
        let (_, jac) = problem.jacobian(&u).unwrap();
        for j in 0..4 {
            let expected = a.pow(3 - j as u32) * &b;
            let diff = (jac.block(j) - &expected).amax();
            assert!(diff <= 1e-12, "block {j}: {diff}");
        }
    }
}

#[test]
fn backward_pass_is_bit_identical_to_naive_products() {
    let mut rng = common::rng(11);
    for horizon in 1..=6 {
        for _ in 0..5 {
            let model = Arc::new(common::SmoothModel::random(&mut rng, 3, 2));
            let problem =
                ShootingProblem::new(model.clone(), common::uniform_vector(&mut rng, 3, 1.0), DVector::zeros(3), horizon)
                    .unwrap();
            let u = common::uniform_vector(&mut rng, problem.n(), 1.0);
            let (_, jac) = problem.jacobian(&u).unwrap();
            let naive = common::naive_jacobian(&problem, model.as_ref() as &dyn SystemModel, &u);
            assert_eq!(jac.matrix, naive, "horizon {horizon}");
        }
    }
}

#[test]
fn residual_and_jacobian_agree_on_residual() {
    let problem = common::pendulum_problem();
    let u = DVector::from_fn(problem.n(), |i, _| 0.01 * (i as f64).sin());
    let (r, _) = problem.jacobian(&u).unwrap();
    assert_eq!(r, problem.residual(&u).unwrap());
}

fn directional_error(problem: &ShootingProblem, u: &DVector<f64>, v: &DVector<f64>, jac: &DMatrix<f64>, t: f64) -> f64 {
    let base = problem.residual(u).unwrap().entries;
    let moved = problem.residual(&(u + v * t)).unwrap().entries;
    (moved - base - jac * v * t).amax()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn random_problems_match_fd(seed in any::<u64>(), m in 1usize..=3, q in 1usize..=2, horizon in 1usize..=10) {
        let mut rng = common::rng(seed);
        let model = Arc::new(common::SmoothModel::random(&mut rng, m, q));
        let problem = ShootingProblem::new(model, common::uniform_vector(&mut rng, m, 1.0), DVector::zeros(m), horizon).unwrap();
        let u = common::uniform_vector(&mut rng, problem.n(), 1.0);
        let (_, jac) = problem.jacobian(&u).unwrap();
        let fd = finite_diff_jacobian(&problem, &u, 1e-6).unwrap();
        let err = max_relative_error(&jac.matrix, &fd);
        prop_assert!(err <= 1e-5, "relative error {err}");
    }

    #[test]
    fn linearization_error_is_second_order(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let model = Arc::new(common::SmoothModel::random(&mut rng, 2, 1));
        let problem = ShootingProblem::new(model, common::uniform_vector(&mut rng, 2, 1.0), DVector::zeros(2), 8).unwrap();
        let u = common::uniform_vector(&mut rng, problem.n(), 1.0);
        let v = common::uniform_vector(&mut rng, problem.n(), 1.0);
        let (_, jac) = problem.jacobian(&u).unwrap();
        let t = 1e-2;
        let e1 = directional_error(&problem, &u, &v, &jac.matrix, t);
        let e2 = directional_error(&problem, &u, &v, &jac.matrix, t / 2.0);
        prop_assume!(e1 > 1e-11);
        prop_assert!(e1 / e2 >= 3.5, "ratio {}", e1 / e2);
    }
}
