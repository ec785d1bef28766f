mod common;

use std::sync::Arc;

use nalgebra::DVector;
use proptest::prelude::*;
use sparsectl::dynamics::LinearModel;
use sparsectl::lsolve::{count_nonzero, DirectionNorm};
use sparsectl::newton::{refine_support, solve, step_size_l, step_size_mu_l, SolveResult, SolverConfig, StepPolicy};
use sparsectl::shooting::{ResidualMap, ShootingProblem};

fn adaptive() -> SolverConfig {
    SolverConfig::default()
}

fn assert_sparsity_growth(res: &SolveResult, m: usize) {
    for rec in &res.history {
        assert!(rec.nnz_u <= (rec.k + 1) * m, "nnz {} after step {}", rec.nnz_u, rec.k + 1);
    }
}

#[test]
fn pendulum_pure_l1_obeys_sparsity_growth() {
    let problem = common::pendulum_problem();
    let res = solve(&problem, &SolverConfig::pure_l1()).unwrap();
    assert!(res.converged());
    assert_sparsity_growth(&res, 2);
}

#[test]
fn pendulum_quadratic_tail() {
    let problem = common::pendulum_problem();
    for cfg in [SolverConfig::pure_l1(), adaptive()] {
        let res = solve(&problem, &cfg).unwrap();
        assert!(res.converged());
        let mut p: Vec<f64> = res.history.iter().map(|r| r.p_k).collect();
        p.push(res.residual_inf);
        for pair in p.windows(2) {
            if pair[0] < 1e-2 && pair[1] > 0.0 {
                assert!(pair[1] <= pair[0].powf(1.5), "{} -> {}", pair[0], pair[1]);
            }
        }
    }
}

#[test]
fn pendulum_fixed_policies_make_progress() {
    let problem = common::pendulum_problem();
    for policy in [StepPolicy::FixedMuL { mu: 1.0, l_const: 1.0 }, StepPolicy::FixedL { l_const: 1.0 }] {
        let cfg = SolverConfig { policy, max_iterations: 200, ..SolverConfig::default() };
        let res = solve(&problem, &cfg).unwrap();
        assert!(res.converged(), "{:?}", res.status);
        assert_sparsity_growth(&res, 2);
        assert!(res.history.iter().all(|r| r.gamma > 0.0 && r.gamma <= 1.0));
    }
}

#[test]
fn refinement_is_no_less_sparse() {
    let problem = common::pendulum_problem();
    let base = solve(&problem, &SolverConfig::pure_l1()).unwrap();
    let refined = refine_support(&problem, &SolverConfig::pure_l1(), 1, 1e-9).unwrap();
    assert!(refined.converged());
    assert!(refined.residual_inf <= 1e-9);
    assert!(refined.u_nnz <= base.u_nnz);
    assert_eq!(count_nonzero(&refined.u_final), refined.u_nnz);
}

#[test]
fn linear_models_converge_in_one_pure_step() {
    let mut rng = common::rng(21);
    for _ in 0..20 {
        let a = common::uniform_matrix(&mut rng, 3, 3, 1.0);
        let b = common::uniform_matrix(&mut rng, 3, 1, 1.0);
        let model = Arc::new(LinearModel::new(a, b).unwrap());
        let x0 = common::uniform_vector(&mut rng, 3, 1.0);
        let target = common::uniform_vector(&mut rng, 3, 1.0);
        let problem = ShootingProblem::new(model, x0, target, 6).unwrap();
        for norm in [DirectionNorm::L1, DirectionNorm::L2] {
            let cfg = SolverConfig { direction_norm: norm, ..SolverConfig::pure_l1() };
            let res = solve(&problem, &cfg).unwrap();
            assert!(res.converged());
            assert_eq!(res.iterations(), 1);
            assert!(res.residual_inf <= 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(30))]

    #[test]
    fn adaptive_steps_strictly_decrease_residual(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let problem = common::solvable_problem(&mut rng, 2, 1, 8);
        let res = solve(&problem, &adaptive()).unwrap();
        let mut p: Vec<f64> = res.history.iter().map(|r| r.p_k).collect();
        p.push(res.residual_inf);
        for pair in p.windows(2) {
            prop_assert!(pair[1] < pair[0]);
        }
        prop_assert!(res.history.iter().all(|r| r.backtracks <= 60));
    }

    #[test]
    fn l1_solves_from_zero_obey_sparsity_growth(seed in any::<u64>(), adaptive_policy in any::<bool>()) {
        let mut rng = common::rng(seed);
        let problem = common::solvable_problem(&mut rng, 2, 1, 10);
        let cfg = if adaptive_policy { adaptive() } else { SolverConfig::pure_l1() };
        let res = solve(&problem, &cfg).unwrap();
        for rec in &res.history {
            prop_assert!(rec.nnz_u <= (rec.k + 1) * problem.n_equations());
        }
    }

    #[test]
    fn step_sizes_lie_in_unit_interval(mu in 1e-3..1e3f64, l in 1e-3..1e3f64, p in 1e-12..1e3f64, w in 0.0..1e3f64) {
        let a = step_size_mu_l(mu, l, p);
        let b = step_size_l(l, p, w);
        prop_assert!(a > 0.0 && a <= 1.0);
        prop_assert!(b > 0.0 && b <= 1.0);
    }
}

#[test]
fn starting_point_is_respected() {
    let problem = common::pendulum_problem();
    let solved = solve(&problem, &SolverConfig::pure_l1()).unwrap();
    let cfg = SolverConfig { u0: Some(solved.u_final.clone()), ..SolverConfig::pure_l1() };
    let again = solve(&problem, &cfg).unwrap();
    assert_eq!(again.iterations(), 0);
    assert_eq!(again.u_final, solved.u_final);
    assert!(again.u_final != DVector::zeros(problem.n()));
}
