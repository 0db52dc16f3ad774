"""Persistently exciting sequences and their block-Hankel matrices."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import linalg
from .errors import ConfigurationError, DimensionError, GenerationError

MAX_REDRAWS = 100


def as_sequence(mu) -> np.ndarray:
    """Coerce to shape (N, m); a 1-D array is a scalar-input sequence."""
    mu = np.asarray(mu, dtype=float)
    if mu.ndim == 1:
        mu = mu[:, None]
    if mu.ndim != 2:
        raise DimensionError(f"sequence must be (N, m), got shape {mu.shape}")
    return mu


def min_length(m: int, L: int) -> int:
    """Shortest sequence that can be PE of order `L` with `m` channels."""
    return (m + 1) * L - 1


def hankel(mu, L: int) -> np.ndarray:
    """Depth-`L` block-Hankel matrix, shape ``(m L, N - L + 1)``.

    Block ``(i, j)`` is ``mu[i + j]``.
    """
    mu = as_sequence(mu)
    N, m = mu.shape
    if L < 1 or N < L:
        raise DimensionError(f"need 1 <= L <= N, got L={L}, N={N}")
    cols = N - L + 1
    H = np.empty((m * L, cols))
    for i in range(L):
        H[i * m:(i + 1) * m] = mu[i:i + cols].T
    return H


def is_pe(mu, L: int) -> bool:
    """True iff the depth-`L` Hankel matrix has full row rank ``m L``."""
    mu = as_sequence(mu)
    N, m = mu.shape
    if L < 1 or N < L:
        return False
    return linalg.rank(hankel(mu, L)) == m * L


@dataclass(frozen=True)
class PeSequence:
    mu: np.ndarray
    order: int

    @property
    def N(self) -> int:
        return self.mu.shape[0]

    @property
    def m(self) -> int:
        return self.mu.shape[1]


def gen_pe_sequence(m: int, L: int, N: int, seed=None) -> PeSequence:
    """Random sequence certified PE of order `L`.

    Entries are uniform on [-1, 1], rescaled so the largest magnitude is 1.
    Draws failing the rank test are replaced (at most ``MAX_REDRAWS`` times).
    """
    if m < 1 or L < 1:
        raise ConfigurationError("m and L must be positive")
    if N < min_length(m, L):
        raise ConfigurationError(
            f"N={N} is below the minimum length (m+1)L-1={min_length(m, L)} for PE of order {L}")
    rng = np.random.default_rng(seed)
    for _ in range(MAX_REDRAWS):
        mu = rng.uniform(-1.0, 1.0, size=(N, m))
        mu /= np.max(np.abs(mu))
        if is_pe(mu, L):
            return PeSequence(mu, L)
    raise GenerationError(f"no PE sequence of order {L} found in {MAX_REDRAWS} draws")


def write_sequence(path, mu) -> None:
    mu = as_sequence(mu)
    lines = [f"{mu.shape[0]} {mu.shape[1]}"]
    lines += [" ".join(f"{v:.17g}" for v in row) for row in mu]
    Path(path).write_text("\n".join(lines) + "\n")


def read_sequence(path) -> np.ndarray:
    return linalg.read_matrix(path)
