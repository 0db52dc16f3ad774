import numpy as np
import pytest

from ctlqr import linalg
from ctlqr.data_pipeline import DataMatrices
from ctlqr.errors import ConfigurationError, DataError, StabilityError
from ctlqr.init_gain import data_stabilizing_gain, virtual_system
from ctlqr.learner import algorithm2
from ctlqr.matrix_equations import solve_are
from ctlqr.simulator import LtiSystem
from helpers import collect, random_plant

UNSTABLE_SCALAR = LtiSystem([[1.0]], [[1.0]])


def test_virtual_system_shapes_and_identity():
    plant = random_plant(3, 1, seed=0)
    d = collect(plant, N=9)
    vs = virtual_system(d)
    assert vs.Bbar.shape == (3, 6)
    rng = np.random.default_rng(0)
    for _ in range(5):
        Kbar = rng.standard_normal((6, 3))
        M = vs.F - vs.G @ Kbar
        np.testing.assert_allclose(d.X @ M, np.eye(3), atol=1e-9)
        K0 = -d.U @ M
        np.testing.assert_allclose(d.Xtilde @ M, plant.closed_loop(K0), atol=1e-8)


def test_virtual_system_degenerate():
    d = DataMatrices(np.zeros((1, 3)), [[1.0, 0.0, 2.0]], [[0.0, 1.0, 0.0]], T=0.2)
    vs = virtual_system(d)
    assert not np.any(vs.Abar) and not np.any(vs.Bbar)
    with pytest.raises(StabilityError):
        data_stabilizing_gain(d)


def test_stable_plant_default_policy():
    plant = random_plant(3, 1, seed=1)
    while not linalg.is_hurwitz(plant.A):
        plant = LtiSystem(plant.A - np.eye(3), plant.B)
    g = data_stabilizing_gain(collect(plant))
    assert g.spectrum.is_hurwitz()
    assert linalg.is_hurwitz(plant.closed_loop(g.K0))
    assert linalg.is_hurwitz(plant.closed_loop(np.zeros((1, 3))))


def test_scalar_pole_target():
    d = collect(UNSTABLE_SCALAR, seed=3)
    g = data_stabilizing_gain(d, pole_spec=[-1.0])
    assert UNSTABLE_SCALAR.closed_loop(g.K0)[0, 0] == pytest.approx(-1.0, abs=1e-8)
    np.testing.assert_allclose(g.spectrum.eigenvalues, [-1.0], atol=1e-8)


def test_pole_list_on_random_plant():
    plant = random_plant(3, 2, seed=4, unstable=True)
    poles = [-1.0, -2.0 + 1j, -2.0 - 1j]
    g = data_stabilizing_gain(collect(plant), pole_spec=poles)
    np.testing.assert_allclose(linalg.eig(plant.closed_loop(g.K0)).sorted(), np.sort_complex(poles),
                               atol=1e-6)


def test_pole_spec_validation():
    d = collect(UNSTABLE_SCALAR)
    with pytest.raises(ConfigurationError):
        data_stabilizing_gain(d, pole_spec=[0.5])
    with pytest.raises(ConfigurationError):
        data_stabilizing_gain(d, pole_spec=[-1.0, -2.0])
    with pytest.raises(ConfigurationError):
        data_stabilizing_gain(d, pole_spec="fast")
    plant = random_plant(2, 1, seed=5)
    with pytest.raises(ConfigurationError):
        data_stabilizing_gain(collect(plant), pole_spec=[-1 + 1j, -2 + 1j])


def test_rank_deficient_data():
    d = DataMatrices(np.zeros((2, 5)), np.zeros((2, 5)), np.zeros((1, 5)), T=0.2)
    with pytest.raises(DataError):
        data_stabilizing_gain(d)


def test_pipeline_on_unstable_plant():
    plant = random_plant(4, 1, seed=6, unstable=True)
    Q, R = np.eye(4), np.eye(1)
    d = collect(plant, seed=6)
    g = data_stabilizing_gain(d)
    spectrum = linalg.eig(plant.closed_loop(g.K0)).sorted()
    np.testing.assert_allclose(g.spectrum.sorted(), spectrum, atol=1e-7 * max(1, np.abs(spectrum).max()))
    _, Kstar = solve_are(plant, Q, R)
    pol = algorithm2(d, Q, R, K0=g.K0, max_iters=20)
    assert np.linalg.norm(pol.K - Kstar) <= 1e-6 * np.linalg.norm(Kstar)
    K0, Kbar, spec = g
    assert K0.shape == (1, 4) and Kbar.shape[1] == 4 and g.condition >= 1
