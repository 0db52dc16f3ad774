import math

import numpy as np
import pytest

from ctlqr.errors import ConfigurationError, DimensionError
from ctlqr.linalg import eig
from ctlqr.simulator import (LtiSystem, PcpeInput, check_nonpathological,
                             discretize_exact, read_trajectory_csv,
                             simulate_pcpe, write_trajectory_csv)
from helpers import SCALAR, random_plant


def test_discretize_integrator():
    sys = LtiSystem(np.zeros((1, 1)), np.eye(1))
    Ad, Bd, Fd, Gd = discretize_exact(sys, 1.0)
    np.testing.assert_allclose(Ad, [[1.0]])
    np.testing.assert_allclose(Bd, [[1.0]])
    np.testing.assert_allclose(Fd, [[1.0]])
    np.testing.assert_allclose(Gd, [[0.5]])


@pytest.mark.parametrize("T", [0.05, 0.2, 1.0])
def test_discretize_scalar_closed_form(T):
    Ad, Bd, Fd, Gd = discretize_exact(SCALAR, T)
    assert Ad[0, 0] == pytest.approx(math.exp(-T), rel=1e-14)
    assert Bd[0, 0] == pytest.approx(1 - math.exp(-T), rel=1e-13)
    assert Fd[0, 0] == pytest.approx(1 - math.exp(-T), rel=1e-13)
    assert Gd[0, 0] == pytest.approx(T - (1 - math.exp(-T)), rel=1e-12)


def test_discretize_small_step():
    _, _, Fd, _ = discretize_exact(SCALAR, 1e-12)
    assert abs(Fd[0, 0]) < 1e-11
    with pytest.raises(ConfigurationError):
        discretize_exact(SCALAR, 0.0)


def test_zero_input_zero_state():
    plant = random_plant(3, 1, seed=0)
    traj = simulate_pcpe(plant, PcpeInput(np.zeros((4, 1)), 0.2, 0.01))
    assert not np.any(traj.states)
    assert not np.any(traj.interval_integrals)


def test_scalar_step_response():
    T = 0.2
    traj = simulate_pcpe(SCALAR, PcpeInput([[1.0]], T, 0.01))
    assert traj.states[-1, 0] == pytest.approx(1 - math.exp(-T), rel=1e-13)
    assert len(traj.times) == 21
    assert traj.times[-1] == pytest.approx(T)


def test_linearity():
    plant = random_plant(3, 2, seed=1)
    rng = np.random.default_rng(1)
    mu, x0 = rng.uniform(-1, 1, (5, 2)), rng.standard_normal(3)
    a = simulate_pcpe(plant, PcpeInput(mu, 0.2, 0.02))
    b = simulate_pcpe(plant, PcpeInput(2 * mu, 0.2, 0.02))
    np.testing.assert_allclose(b.states, 2 * a.states, atol=1e-14)
    c = simulate_pcpe(plant, PcpeInput(mu, 0.2, 0.02), x0=x0)
    d = simulate_pcpe(plant, PcpeInput(0 * mu, 0.2, 0.02), x0=x0)
    np.testing.assert_allclose(c.states, a.states + d.states, atol=1e-13)


def test_semigroup_of_steps():
    plant = random_plant(4, 1, seed=2)
    mu = np.array([[0.7]])
    one = simulate_pcpe(plant, PcpeInput(mu, 0.2, 0.2), x0=np.ones(4))
    two = simulate_pcpe(plant, PcpeInput(mu, 0.2, 0.1), x0=np.ones(4))
    np.testing.assert_allclose(one.states[-1], two.states[-1], atol=1e-10)


def test_first_order_consistency():
    plant = random_plant(2, 1, seed=3)
    x0 = np.array([1.0, -1.0])
    errs = []
    for dt in (1e-2, 1e-3):
        traj = simulate_pcpe(plant, PcpeInput([[0.5]], 0.1, dt), x0=x0)
        x, u = traj.states, traj.inputs
        fd = (x[1:] - x[:-1]) / dt
        errs.append(np.abs(fd - (x[:-1] @ plant.A.T + u[:-1] @ plant.B.T)).max())
    assert errs[1] < errs[0] / 5


def test_input_validation():
    with pytest.raises(ConfigurationError):
        PcpeInput([[1.0]], 0.2, 0.03)
    with pytest.raises(DimensionError):
        simulate_pcpe(SCALAR, PcpeInput(np.zeros((2, 2)), 0.2, 0.1))
    with pytest.raises(DimensionError):
        simulate_pcpe(SCALAR, PcpeInput([[1.0]], 0.2, 0.1), x0=[0.0, 0.0])
    with pytest.raises(DimensionError):
        LtiSystem(np.eye(2), np.ones((3, 1)))


def test_pathological_sampling():
    rotation = eig([[0.0, 1.0], [-1.0, 0.0]])
    assert not check_nonpathological(rotation, math.pi)
    assert not check_nonpathological(rotation, 2 * math.pi)
    assert check_nonpathological(rotation, 0.2)
    assert check_nonpathological(eig(np.diag([-1.0, -2.0, 3.0])), math.pi)


def test_trajectory_csv_roundtrip(tmp_path):
    plant = random_plant(2, 1, seed=4)
    traj = simulate_pcpe(plant, PcpeInput([[0.3], [-0.2]], 0.2, 0.05), x0=[1.0, 0.0])
    write_trajectory_csv(tmp_path / "t.csv", traj)
    back = read_trajectory_csv(tmp_path / "t.csv")
    np.testing.assert_array_equal(back.states, traj.states)
    np.testing.assert_array_equal(back.inputs, traj.inputs)
    np.testing.assert_array_equal(back.times, traj.times)
