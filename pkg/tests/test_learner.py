import math

import numpy as np
import pytest

from ctlqr.bench import random_stable_system
from ctlqr.data_pipeline import DataMatrices, full_selection, select_columns
from ctlqr.errors import ConsistencyError, DataError, StabilityError
from ctlqr.kleinman import kleinman_iterate, model_matrices
from ctlqr.learner import (algorithm2, build_iteration_matrices, extract_policy,
                           policy_step, symmetry_tolerance)
from ctlqr.matrix_equations import solve_are
from helpers import (DOUBLE_INTEGRATOR, K_DI, P_DI, SCALAR, collect, random_plant,
                     stabilizing_start)


def test_iteration_matrices_zero_gain():
    plant = random_plant(3, 2, seed=0)
    sel = select_columns(collect(plant))
    R = np.diag([1.0, 3.0])
    Ym, Yp, Qi = build_iteration_matrices(sel, np.zeros((2, 3)), np.eye(3), R)
    np.testing.assert_allclose(Ym[3:], -R @ sel.Ueta)
    np.testing.assert_allclose(Yp[3:], -R @ sel.Ueta)
    np.testing.assert_allclose(Qi, sel.Xeta.T @ sel.Xeta, atol=1e-15)


def test_iteration_matrices_model_identity():
    plant = random_plant(3, 1, seed=1, unstable=True)
    Q, R = np.eye(3), np.eye(1)
    K = stabilizing_start(plant)
    sel = select_columns(collect(plant))
    Ym, Yp, _ = build_iteration_matrices(sel, K, Q, R)
    Pm, Pp, _, _ = model_matrices(plant, Q, R, K)
    np.testing.assert_allclose(Ym, Pm @ sel.Zeta, atol=1e-9 * np.abs(Ym).max())
    np.testing.assert_allclose(Yp, Pp @ sel.Zeta, atol=1e-9 * np.abs(Yp).max())


def test_iteration_matrices_scalar_weight():
    sel = select_columns(collect(SCALAR))
    for k in (0.0, 0.3, -1.2):
        _, _, Qi = build_iteration_matrices(sel, [[k]], [[1.0]], [[2.0]])
        x = sel.Xeta[0]
        np.testing.assert_allclose(Qi, np.outer(x, x) * (1 + 2 * k * k), rtol=1e-14)


def test_iteration_matrices_shape_check():
    sel = select_columns(collect(SCALAR))
    with pytest.raises(ValueError):
        build_iteration_matrices(sel, np.zeros((1, 2)), [[1.0]], [[1.0]])


def test_extract_policy():
    P, K = extract_policy(np.vstack([np.eye(2), np.zeros((1, 2))]), 2)
    np.testing.assert_array_equal(P, np.eye(2))
    np.testing.assert_array_equal(K, np.zeros((1, 2)))
    P, K = extract_policy(np.vstack([P_DI, K_DI]), 2)
    np.testing.assert_array_equal(P, P_DI)
    np.testing.assert_array_equal(K, K_DI)
    with pytest.raises(ConsistencyError):
        extract_policy(np.array([[1.0, 0.5], [0.0, 1.0], [0.0, 0.0]]), 2)
    assert symmetry_tolerance(10.0) == 1e-7 and symmetry_tolerance(1e6) == pytest.approx(1e-3)


def test_scalar_trace_matches_kleinman():
    pol = algorithm2(collect(SCALAR), [[1.0]], [[1.0]], eps=1e-12)
    got = [float(k[0, 0]) for k in pol.trace.gains[1:4]]
    np.testing.assert_allclose(got, [0.5, 5 / 12, 169 / 408], atol=1e-10)
    assert pol.K[0, 0] == pytest.approx(math.sqrt(2) - 1, abs=1e-10)
    assert pol.trace.converged


def test_double_integrator():
    d = collect(DOUBLE_INTEGRATOR, x0=[1.0, 0.0])
    pol = algorithm2(d, np.eye(2), [[1.0]], K0=[[1.0, 1.0]], max_iters=10)
    np.testing.assert_allclose(pol.K, K_DI, atol=1e-6)
    np.testing.assert_allclose(pol.P, P_DI, atol=1e-6)


def test_huge_eps_stops_after_one_iteration():
    pol = algorithm2(collect(SCALAR), [[1.0]], [[1.0]], eps=10.0)
    assert len(pol.trace) == 1


def test_fixed_iterations():
    pol = algorithm2(collect(SCALAR), [[1.0]], [[1.0]], max_iters=7, fixed_iterations=True)
    assert len(pol.trace) == 7 and pol.trace.converged


@pytest.mark.parametrize("solver", ["structured", "kron"])
def test_matches_kleinman_on_random_plants(solver):
    for seed in range(8):
        plant = random_plant(3, 2, seed=600 + seed, unstable=bool(seed % 2))
        Q, R = np.eye(3), np.eye(2)
        K0 = stabilizing_start(plant)
        pol = algorithm2(collect(plant, seed=seed, x0=np.ones(3)), Q, R, K0=K0, max_iters=8,
                         fixed_iterations=True, solver=solver)
        ref = kleinman_iterate(plant, Q, R, K0, eps=0.0, max_iters=8)
        for a, b in zip(pol.trace.gains, ref.gains):
            assert np.linalg.norm(a - b) <= 1e-8 * max(1.0, np.linalg.norm(b))


def test_selection_invariance():
    plant = random_plant(3, 1, seed=11, unstable=True)
    d = collect(plant, N=12, x0=np.ones(3))
    K0 = stabilizing_start(plant)
    a = algorithm2(d, np.eye(3), [[1.0]], K0=K0, max_iters=1, fixed_iterations=True)
    b = algorithm2(d, np.eye(3), [[1.0]], K0=K0, max_iters=1, fixed_iterations=True,
                   solver="kron", selection=full_selection(d))
    assert np.linalg.norm(a.K - b.K) <= 1e-8 * max(1.0, np.linalg.norm(a.K))


def test_policy_step_residual():
    plant = random_plant(2, 1, seed=12)
    sel = select_columns(collect(plant))
    P, K, res = policy_step(sel, np.zeros((1, 2)), np.eye(2), [[1.0]])
    assert res <= 1e-10 and P.shape == (2, 2) and K.shape == (1, 2)


def test_destabilizing_start_detected():
    d = collect(DOUBLE_INTEGRATOR, x0=[1.0, 0.0])
    with pytest.raises(StabilityError):
        algorithm2(d, np.eye(2), [[1.0]], K0=[[-1.0, -1.0]])


def test_input_errors():
    plant = random_plant(2, 1, seed=13)
    d = collect(plant)
    with pytest.raises(ValueError):
        algorithm2(d, np.eye(2), [[1.0]], solver="newton")
    with pytest.raises(ValueError):
        algorithm2(d, np.eye(2), [[1.0]], K0=np.zeros((2, 2)))
    flat = DataMatrices(np.zeros((2, 5)), np.zeros((2, 5)), np.ones((1, 5)), T=0.2)
    with pytest.raises(DataError):
        algorithm2(flat, np.eye(2), [[1.0]])


def test_sampled_data_accuracy():
    plant = random_stable_system(3, 1, seed=14)
    Q, R = np.eye(3), 2 * np.eye(1)
    _, Kstar = solve_are(plant, Q, R)
    d = collect(plant, dt=1e-4, mode="trapezoid")
    pol = algorithm2(d, Q, R, max_iters=10, fixed_iterations=True)
    assert np.linalg.norm(pol.K - Kstar) <= 1e-4 * np.linalg.norm(Kstar)
