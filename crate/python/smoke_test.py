"""Smoke test for the pysparsectl extension module."""

import math

import pysparsectl as sc


def main():
    model = sc.SystemModel.pendulum(1.0, 1.0, 0.05)
    x1 = model.step([0.0, 0.0], [0.0])
    assert x1 == [0.0, 0.0], x1

    jx, ju = model.jacobians([0.3, -0.2], [0.5])
    fx, fu = model.finite_diff_jacobians([0.3, -0.2], [0.5])
    err = max(abs(a - b) for ra, rb in zip(jx + ju, fx + fu) for a, b in zip(ra, rb))
    assert err < 1e-6, err

    problem = sc.ShootingProblem(model, [0.0, 0.0], [math.pi / 4, 0.0], 160)
    r, jac = problem.jacobian([0.0] * problem.n)
    assert len(jac) == 2 and len(jac[0]) == 160

    res = sc.solve(problem, algorithm="pure")
    assert res.converged, res
    assert res.residual_inf <= 1e-9
    assert res.u_nnz <= res.iterations * 2
    print(res)

    refined = sc.refine_support(problem)
    print("refined:", refined, "support", refined.support)

    d = sc.min_l1_direction([[1.0, 2.0, 0.0], [0.0, 1.0, 1.0]], [1.0, 1.0])
    assert d["status"] == "optimal"
    assert abs(d["objective"] - 1.0) < 1e-12, d

    assert abs(sc.h0_series(0.5) - 0.81642151) < 1e-8
    rep = sc.kantorovich_check(1.0, 1.0, 0.2, 1.0)
    assert rep["condition_holds"]
    print("k_max:", sc.k_max_bound(1.0, 1.0, 0.5))
    print("smoke test passed")


if __name__ == "__main__":
    main()
