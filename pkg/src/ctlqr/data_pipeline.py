"""Integrated data matrices and column selection.

For a trajectory split into N intervals of length T, column j of

* ``Xtilde`` is ``x((j+1)T) - x(jT)``,
* ``X`` is ``int_0^T x(tau + jT) dtau``,
* ``U`` is ``int_0^T u(tau + jT) dtau``,

so that ``Xtilde = A X + B U`` holds exactly for exact integrals.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.linalg

from . import linalg
from .errors import ConfigurationError, DataError, DimensionError, RankError
from .simulator import Trajectory, _steps_per_interval


@dataclass(frozen=True)
class DataMatrices:
    Xtilde: np.ndarray
    X: np.ndarray
    U: np.ndarray
    T: float
    dt: Optional[float] = None
    seed: Optional[int] = None
    mode: str = "exact"

    def __post_init__(self):
        Xt = np.atleast_2d(np.asarray(self.Xtilde, dtype=float))
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        U = np.atleast_2d(np.asarray(self.U, dtype=float))
        if Xt.shape != X.shape or U.shape[1] != X.shape[1]:
            raise DimensionError(
                f"inconsistent data shapes Xtilde {Xt.shape}, X {X.shape}, U {U.shape}")
        for name, M in (("Xtilde", Xt), ("X", X), ("U", U)):
            if not np.all(np.isfinite(M)):
                raise DataError(f"{name} contains NaN or Inf entries")
        object.__setattr__(self, "Xtilde", Xt)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "U", U)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def m(self) -> int:
        return self.U.shape[0]

    @property
    def N(self) -> int:
        return self.X.shape[1]

    @property
    def Z(self) -> np.ndarray:
        return np.vstack([self.X, self.U])


@dataclass(frozen=True)
class ColumnSelection:
    """``n + m`` columns of ``Z = [X; U]`` forming a nonsingular ``Zeta``."""

    eta: tuple
    Zeta: np.ndarray
    Xeta: np.ndarray
    Ueta: np.ndarray
    Xtilde_eta: np.ndarray
    condition: float


def build_data_matrices(traj: Trajectory, T: float, mode: str = "auto",
                        seed: Optional[int] = None) -> DataMatrices:
    """Assemble ``Xtilde, X, U`` from a sampled trajectory.

    `mode` is ``"exact"`` (use the simulator's exact interval integrals),
    ``"trapezoid"`` (composite trapezoid rule on the samples) or ``"auto"``
    (exact when available).  ``U`` is integrated with the held value on each
    sample step, which is exact for inputs that switch on sample instants.
    """
    dt = traj.dt
    k = _steps_per_interval(T, dt)
    if (len(traj.times) - 1) % k:
        raise ConfigurationError(
            f"trajectory with {len(traj.times)} samples is not a whole number of intervals")
    N = (len(traj.times) - 1) // k
    if N < 1:
        raise ConfigurationError("trajectory shorter than one interval")
    if mode == "auto":
        mode = "exact" if traj.interval_integrals is not None else "trapezoid"

    x = traj.states
    ends = x[::k]
    Xtilde = (ends[1:] - ends[:-1]).T
    U = (traj.inputs[:-1].reshape(N, k, -1).sum(axis=1) * dt).T

    if mode == "exact":
        if traj.interval_integrals is None:
            raise ConfigurationError("trajectory carries no exact interval integrals")
        X = np.asarray(traj.interval_integrals, dtype=float).T
    elif mode == "trapezoid":
        body = x[:-1].reshape(N, k, -1)
        X = (dt * (body.sum(axis=1) - 0.5 * body[:, 0] + 0.5 * ends[1:])).T
    else:
        raise ConfigurationError(f"unknown integration mode {mode!r}")
    return DataMatrices(Xtilde, X, U, T=T, dt=dt, seed=seed, mode=mode)


def verify_rank(d: DataMatrices) -> bool:
    """True iff ``[X; U]`` has full row rank ``n + m``."""
    return d.N >= d.n + d.m and linalg.rank(d.Z) == d.n + d.m


def select_columns(d: DataMatrices) -> ColumnSelection:
    """Pick ``n + m`` columns of ``Z`` by QR with column pivoting.

    Each step takes the column with the largest component orthogonal to
    those already chosen, which keeps the smallest pivot as large as the
    greedy choice allows.  Ties go to the lower column index.
    """
    Z = d.Z
    r = d.n + d.m
    if d.N < r:
        raise RankError(f"only {d.N} data columns, need at least {r}")
    _, R, piv = scipy.linalg.qr(Z, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    tol = linalg.rank_tol(np.array([diag[0]]), Z.shape) if diag.size else 0.0
    if diag.size < r or diag[r - 1] <= tol:
        raise RankError(
            f"data matrix [X; U] is rank deficient: pivot {r} is "
            f"{diag[r - 1] if diag.size >= r else 0.0:.3e}")
    eta = tuple(sorted(int(i) for i in piv[:r]))
    cols = list(eta)
    Zeta = Z[:, cols]
    return ColumnSelection(
        eta=eta,
        Zeta=Zeta,
        Xeta=d.X[:, cols],
        Ueta=d.U[:, cols],
        Xtilde_eta=d.Xtilde[:, cols],
        condition=linalg.cond(Zeta),
    )


def full_selection(d: DataMatrices) -> ColumnSelection:
    """Selection that keeps every column (used when Zeta is too ill-conditioned)."""
    cols = list(range(d.N))
    return ColumnSelection(tuple(cols), d.Z, d.X, d.U, d.Xtilde, linalg.cond(d.Z))


def model_residual(d: DataMatrices, A, B) -> float:
    """``||Xtilde - (A X + B U)||_F`` relative to ``||Xtilde||_F`` (model audit)."""
    r = np.linalg.norm(d.Xtilde - (A @ d.X + B @ d.U))
    s = np.linalg.norm(d.Xtilde)
    return float(r / s) if s > 0 else float(r)


# -- bundle on disk ----------------------------------------------------------


def write_bundle(directory, d: DataMatrices, extra: Optional[dict] = None) -> None:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    linalg.write_matrix(out / "Xtilde.txt", d.Xtilde)
    linalg.write_matrix(out / "X.txt", d.X)
    linalg.write_matrix(out / "U.txt", d.U)
    meta = {"T": d.T, "N": d.N, "dt": d.dt, "seed": d.seed, "mode": d.mode}
    if extra:
        meta.update(extra)
    (out / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def read_bundle(directory) -> DataMatrices:
    src = Path(directory)
    try:
        meta = json.loads((src / "meta.json").read_text())
        Xt = linalg.read_matrix(src / "Xtilde.txt")
        X = linalg.read_matrix(src / "X.txt")
        U = linalg.read_matrix(src / "U.txt")
    except FileNotFoundError as exc:
        raise DataError(f"incomplete data bundle in {src}: {exc.filename} missing") from exc
    except (ValueError, KeyError) as exc:
        raise DataError(f"corrupted data bundle in {src}: {exc}") from exc
    d = DataMatrices(Xt, X, U, T=float(meta["T"]), dt=meta.get("dt"),
                     seed=meta.get("seed"), mode=meta.get("mode", "exact"))
    if int(meta.get("N", d.N)) != d.N:
        raise DataError(f"bundle metadata says N={meta['N']}, matrices have {d.N} columns")
    return d
