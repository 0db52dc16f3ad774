"""Shared builders for the test suite."""
import numpy as np

from ctlqr import linalg
from ctlqr.data_pipeline import build_data_matrices
from ctlqr.excitation import gen_pe_sequence
from ctlqr.matrix_equations import prestabilizing_gain
from ctlqr.simulator import LtiSystem, PcpeInput, simulate_pcpe

DOUBLE_INTEGRATOR = LtiSystem(np.array([[0.0, 1.0], [0.0, 0.0]]), np.array([[0.0], [1.0]]))
SCALAR = LtiSystem(np.array([[-1.0]]), np.array([[1.0]]))
SQRT3 = np.sqrt(3.0)
P_DI = np.array([[SQRT3, 1.0], [1.0, SQRT3]])
K_DI = np.array([[1.0, SQRT3]])


CTRB_COND_MAX = 1e4


def random_plant(n, m, seed, unstable=False):
    """Gaussian controllable plant; with `unstable` at least one eigenvalue in Re > 0.

    Draws whose controllability matrix has condition number above
    ``CTRB_COND_MAX`` are rejected: they are controllable in exact arithmetic
    but their Riccati gains run to 1e4 and beyond.
    """
    rng = np.random.default_rng(seed)
    while True:
        A = rng.standard_normal((n, n)) / np.sqrt(n)
        B = rng.standard_normal((n, m))
        if unstable:
            A = A + (0.2 - linalg.eig(A).max_real + rng.uniform(0, 0.5)) * np.eye(n)
        if (linalg.is_controllable(A, B)
                and linalg.cond(linalg.controllability_matrix(A, B)) <= CTRB_COND_MAX):
            return LtiSystem(A, B)


def stabilizing_start(plant):
    if linalg.is_hurwitz(plant.A):
        return np.zeros((plant.m, plant.n))
    return prestabilizing_gain(plant.A, plant.B)


def collect(plant, seed=0, T=0.2, dt=None, N=None, mode="exact", x0=None, order=None):
    n, m = plant.n, plant.m
    N = (n + 1) * m + n if N is None else N
    seq = gen_pe_sequence(m, n + 1 if order is None else order, N, seed=seed)
    traj = simulate_pcpe(plant, PcpeInput(seq.mu, T, T if dt is None else dt), x0=x0)
    return build_data_matrices(traj, T, mode=mode)
