mod common;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use sparsectl::dynamics::{
    finite_diff_jacobians, max_relative_error, DuffingModel, LinearModel, PendulumModel, SystemModel,
    VanDerPolModel, DEFAULT_FD_STEP,
};

fn assert_fd_match(model: &dyn SystemModel, x: &[f64], u: &[f64]) -> Result<(), TestCaseError> {
    let x = DVector::from_column_slice(x);
    let u = DVector::from_column_slice(u);
    let (fx, fu) = finite_diff_jacobians(model, 0, &x, &u, DEFAULT_FD_STEP).unwrap();
    let ex = max_relative_error(&model.jac_x(0, &x, &u), &fx);
    let eu = max_relative_error(&model.jac_u(0, &x, &u), &fu);
    prop_assert!(ex <= 1e-5, "jac_x error {ex}");
    prop_assert!(eu <= 1e-5, "jac_u error {eu}");
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn pendulum_jacobians(x0 in -3.0..3.0f64, x1 in -3.0..3.0f64, u in -2.0..2.0f64) {
        let model = PendulumModel::new(0.3, 0.9, 0.04).unwrap();
        assert_fd_match(&model, &[x0, x1], &[u])?;
    }

    #[test]
    fn van_der_pol_jacobians(x0 in -2.0..2.0f64, x1 in -2.0..2.0f64, u in -1.0..1.0f64) {
        let model = VanDerPolModel::new(1.0, 0.05).unwrap();
        assert_fd_match(&model, &[x0, x1], &[u])?;
    }

    #[test]
    fn duffing_jacobians(x0 in -2.0..2.0f64, x1 in -2.0..2.0f64, u in -1.0..1.0f64) {
        let model = DuffingModel::new(0.2, -1.0, 1.0, 0.05).unwrap();
        assert_fd_match(&model, &[x0, x1], &[u])?;
    }

    #[test]
    fn linear_jacobians(seed in any::<u64>(), x0 in -1.0..1.0f64, x1 in -1.0..1.0f64, u in -1.0..1.0f64) {
        let mut rng = common::rng(seed);
        let a = common::uniform_matrix(&mut rng, 2, 2, 1.0);
        let b = common::uniform_matrix(&mut rng, 2, 1, 1.0);
        let model = LinearModel::new(a, b).unwrap();
        assert_fd_match(&model, &[x0, x1], &[u])?;
    }

    #[test]
    fn smooth_model_jacobians(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let model = common::SmoothModel::random(&mut rng, 3, 2);
        let x = common::uniform_vector(&mut rng, 3, 1.0);
        let u = common::uniform_vector(&mut rng, 2, 1.0);
        assert_fd_match(&model, x.as_slice(), u.as_slice())?;
    }

    #[test]
    fn pendulum_step_is_translation_periodic(x0 in -3.0..3.0f64, x1 in -3.0..3.0f64, u in -1.0..1.0f64) {
        let model = PendulumModel::new(0.3, 0.9, 0.04).unwrap();
        let a = model.step(0, &DVector::from_vec(vec![x0, x1]), &DVector::from_vec(vec![u]));
        let b = model.step(0, &DVector::from_vec(vec![x0 + 2.0 * std::f64::consts::PI, x1]), &DVector::from_vec(vec![u]));
        prop_assert!((a[1] - b[1]).abs() < 1e-12);
        prop_assert!((b[0] - a[0] - 2.0 * std::f64::consts::PI).abs() < 1e-12);
    }
}

#[test]
fn pendulum_analytic_matches_fd_at_reference_point() {
    let model = PendulumModel::new(0.3, 0.9, 0.04).unwrap();
    let x = DVector::from_vec(vec![1.0, 0.5]);
    let u = DVector::from_vec(vec![0.0]);
    let (fx, _) = finite_diff_jacobians(&model, 0, &x, &u, 1e-6).unwrap();
    assert!(max_relative_error(&model.pendulum_jac_x(&x).unwrap(), &fx) <= 1e-8);
    assert_eq!(model.jac_u(0, &x, &u), DMatrix::from_column_slice(2, 1, &[0.0, 1.0]));
}

proptest! {
    #[test]
    fn rollout_has_horizon_plus_one_states(horizon in 0usize..20, seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let model = PendulumModel::new(0.3, 0.9, 0.04).unwrap();
        let controls: Vec<_> = (0..horizon).map(|_| common::uniform_vector(&mut rng, 1, 1.0)).collect();
        let traj = sparsectl::dynamics::rollout(&model, &DVector::from_vec(vec![1.0, 0.5]), &controls).unwrap();
        prop_assert_eq!(traj.len(), horizon + 1);
    }

    #[test]
    fn control_affine_input_jacobian_is_constant(j in 0usize..50, x0 in -2.0..2.0f64, x1 in -2.0..2.0f64, u in -2.0..2.0f64) {
        let model = VanDerPolModel::new(1.0, 0.05).unwrap();
        let origin = DVector::zeros(2);
        let reference = model.jac_u(0, &origin, &DVector::zeros(1));
        prop_assert_eq!(model.jac_u(j, &DVector::from_vec(vec![x0, x1]), &DVector::from_vec(vec![u])), reference);
    }
}
