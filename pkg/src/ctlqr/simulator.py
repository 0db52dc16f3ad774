"""Exact simulation of ``x' = A x + B u`` under piecewise-constant inputs."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import linalg
from .errors import ConfigurationError, DimensionError
from .linalg import Spectrum

DIVISIBILITY_RTOL = 1e-12
PATHOLOGICAL_GUARD = 1e-9


@dataclass(frozen=True)
class LtiSystem:
    """State matrix ``A`` (n x n) and input matrix ``B`` (n x m).

    Controllability of ``(A, B)`` is a standing assumption of the learning
    algorithms; it is certified by :meth:`require_controllable` rather than on
    construction so that degenerate plants can still be simulated.
    """

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = linalg.as_square(self.A, "A")
        B = linalg.as_matrix(self.B, "B")
        if B.shape[0] != A.shape[0]:
            raise DimensionError(f"B has {B.shape[0]} rows, A is {A.shape}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    def is_controllable(self) -> bool:
        return linalg.is_controllable(self.A, self.B)

    def require_controllable(self) -> "LtiSystem":
        if not self.is_controllable():
            raise ConfigurationError("(A, B) is not controllable")
        return self

    def closed_loop(self, K) -> np.ndarray:
        return self.A - self.B @ np.atleast_2d(K)


def _steps_per_interval(T: float, dt: float) -> int:
    if not (T > 0 and dt > 0):
        raise ConfigurationError("T and dt must be positive")
    k = int(round(T / dt))
    if k < 1 or abs(k * dt - T) > DIVISIBILITY_RTOL * T:
        raise ConfigurationError(f"sample step dt={dt!r} does not divide T={T!r}")
    return k


@dataclass(frozen=True)
class PcpeInput:
    """Piecewise-constant input: ``u(t + iT) = mu[i]`` for ``0 <= t < T``.

    `mu` has shape (N, m).  `dt` is the sampling step and must divide `T`.
    """

    mu: np.ndarray
    T: float
    dt: float

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        if mu.ndim == 1:
            mu = mu[:, None]
        if mu.ndim != 2 or mu.shape[0] < 1:
            raise DimensionError(f"mu must have shape (N, m), got {mu.shape}")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "T", float(self.T))
        object.__setattr__(self, "dt", float(self.dt))
        _steps_per_interval(self.T, self.dt)

    @property
    def N(self) -> int:
        return self.mu.shape[0]

    @property
    def m(self) -> int:
        return self.mu.shape[1]

    @property
    def steps_per_interval(self) -> int:
        return _steps_per_interval(self.T, self.dt)


@dataclass(frozen=True)
class Trajectory:
    """Uniformly sampled state and input over ``[0, N T]``.

    ``inputs[k]`` is the input held on ``[t_k, t_k + dt)``; the last sample
    repeats the final held value.  ``interval_integrals``, when present, holds
    the exact ``int_0^T x(tau + jT) dtau`` for each interval as rows.
    """

    times: np.ndarray
    states: np.ndarray
    inputs: np.ndarray
    interval_integrals: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float).ravel()
        x = np.atleast_2d(np.asarray(self.states, dtype=float))
        u = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        if not (len(t) == len(x) == len(u)):
            raise DimensionError("times, states and inputs must have equal length")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "states", x)
        object.__setattr__(self, "inputs", u)

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else 0.0

    @property
    def n(self) -> int:
        return self.states.shape[1]

    @property
    def m(self) -> int:
        return self.inputs.shape[1]


def discretize_exact(sys: LtiSystem, h: float):
    """Exact zero-order-hold maps over a step of length `h`.

    Returns ``(Ad, Bd, Fd, Gd)`` such that, for constant input ``u0``,
    ``x(h) = Ad x(0) + Bd u0`` and ``int_0^h x = Fd x(0) + Gd u0``.  All four
    blocks come from a single exponential of
    ``[[A, 0, B], [I, 0, 0], [0, 0, 0]]`` acting on ``(x, int x, u)``.
    """
    if not h > 0:
        raise ConfigurationError("h must be positive")
    n, m = sys.n, sys.m
    M = np.zeros((2 * n + m, 2 * n + m))
    M[:n, :n] = sys.A
    M[:n, 2 * n:] = sys.B
    M[n:2 * n, :n] = np.eye(n)
    E = linalg.matexp(M, h)
    return E[:n, :n], E[:n, 2 * n:], E[n:2 * n, :n], E[n:2 * n, 2 * n:]


def simulate_pcpe(sys: LtiSystem, inp: PcpeInput, x0=None) -> Trajectory:
    """Sample the response to a PCPE input at every multiple of ``inp.dt``."""
    if inp.m != sys.m:
        raise DimensionError(f"input has {inp.m} channels, system expects {sys.m}")
    n, N, k = sys.n, inp.N, inp.steps_per_interval
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).ravel().copy()
    if x.shape != (n,):
        raise DimensionError(f"x0 must have length {n}")
    Ad, Bd, _, _ = discretize_exact(sys, inp.dt)
    _, _, FT, GT = discretize_exact(sys, inp.T)

    total = N * k + 1
    states = np.empty((total, n))
    inputs = np.empty((total, sys.m))
    integrals = np.empty((N, n))
    states[0] = x
    AdT = Ad.T
    for i in range(N):
        mu = inp.mu[i]
        integrals[i] = FT @ x + GT @ mu
        drive = Bd @ mu
        base = i * k
        inputs[base:base + k] = mu
        for j in range(1, k + 1):
            x = x @ AdT + drive
            states[base + j] = x
    inputs[-1] = inp.mu[-1]
    times = np.arange(total) * inp.dt
    return Trajectory(times, states, inputs, integrals)


def check_nonpathological(spectrum: Spectrum, T: float, guard: float = PATHOLOGICAL_GUARD) -> bool:
    """True iff ``T`` avoids every ``2 pi k / |Im(lambda_i - lambda_j)|``, ``k >= 1``."""
    ev = np.asarray(spectrum.eigenvalues if isinstance(spectrum, Spectrum) else spectrum,
                    dtype=complex)
    for a in range(len(ev)):
        for b in range(a + 1, len(ev)):
            d = abs((ev[a] - ev[b]).imag)
            if d <= guard:
                continue
            period = 2 * np.pi / d
            k = round(T / period)
            if k >= 1 and abs(T - k * period) <= guard:
                return False
    return True


# -- trajectory CSV ----------------------------------------------------------


def write_trajectory_csv(path, traj: Trajectory) -> None:
    n, m = traj.n, traj.m
    header = ["t"] + [f"x{i + 1}" for i in range(n)] + [f"u{i + 1}" for i in range(m)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for t, x, u in zip(traj.times, traj.states, traj.inputs):
            w.writerow([f"{t:.17g}"] + [f"{v:.17g}" for v in x] + [f"{v:.17g}" for v in u])


def read_trajectory_csv(path) -> Trajectory:
    with open(Path(path), newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], np.array(rows[1:], dtype=float)
    n = sum(1 for h in header if h.startswith("x"))
    if header[0] != "t" or len(header) < 3 or n == 0:
        raise ValueError(f"{path}: unexpected header {header}")
    return Trajectory(body[:, 0], body[:, 1:1 + n], body[:, 1 + n:])
