use nalgebra::DMatrix;
use pysparsectl::{matrix_from_rows, matrix_to_rows, solver_config};
use sparsectl::newton::StepPolicy;

#[test]
fn rows_round_trip() {
    let rows = vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]];
    let m = matrix_from_rows(&rows).unwrap();
    assert_eq!(m, DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
    assert_eq!(matrix_to_rows(&m), rows);
}

#[test]
fn ragged_rows_rejected() {
    pyo3::Python::initialize();
    assert!(matrix_from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    assert!(matrix_from_rows(&[]).is_err());
}

#[test]
fn solver_config_policies() {
    pyo3::Python::initialize();
    let cfg = solver_config("fixed_mu_l", "l1", 1e-9, 50, 10, None, 0.5, Some(2.0), Some(3.0)).unwrap();
    assert_eq!(cfg.policy, StepPolicy::FixedMuL { mu: 2.0, l_const: 3.0 });
    assert!(solver_config("fixed_l", "l1", 1e-9, 50, 10, None, 0.5, None, None).is_err());
    assert!(solver_config("pure", "l3", 1e-9, 50, 10, None, 0.5, None, None).is_err());
    assert!(solver_config("newton", "l1", 1e-9, 50, 10, None, 0.5, None, None).is_err());
}
