"""Dense real linear-algebra kernel.

Thin, validated wrappers around LAPACK (through numpy/scipy) plus the plain
text matrix format used for every file the package reads or writes.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import TextIO

import numpy as np
import scipy.linalg

from .errors import DimensionError, NumericalError

RANK_SAFETY = 10.0
PAIRING_TOL = 1e-9


def as_matrix(M, name: str = "matrix") -> np.ndarray:
    """Return `M` as a finite 2-D float array with at least one row and column."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {M.shape}")
    if M.shape[0] < 1 or M.shape[1] < 1:
        raise DimensionError(f"{name} must be non-empty, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} contains NaN or Inf entries")
    return M


def as_square(M, name: str = "matrix") -> np.ndarray:
    M = as_matrix(M, name)
    if M.shape[0] != M.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {M.shape}")
    return M


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues of a real square matrix."""

    eigenvalues: np.ndarray

    def __post_init__(self):
        ev = np.asarray(self.eigenvalues, dtype=complex).ravel()
        object.__setattr__(self, "eigenvalues", ev)

    def __len__(self):
        return self.eigenvalues.size

    def __iter__(self):
        return iter(self.eigenvalues)

    @property
    def max_real(self) -> float:
        return float(np.max(self.eigenvalues.real))

    def is_hurwitz(self) -> bool:
        return self.max_real < 0.0

    def is_conjugate_closed(self, tol: float = PAIRING_TOL) -> bool:
        return conjugate_closed(self.eigenvalues, tol)

    def sorted(self) -> np.ndarray:
        """Eigenvalues ordered by real part, then imaginary part."""
        ev = self.eigenvalues
        return ev[np.lexsort((ev.imag, ev.real))]


def conjugate_closed(values, tol: float = PAIRING_TOL) -> bool:
    """True when every complex entry has a matching conjugate (multiset sense)."""
    vals = list(np.asarray(values, dtype=complex).ravel())
    scale = max(1.0, max((abs(v) for v in vals), default=1.0))
    while vals:
        v = vals.pop()
        if abs(v.imag) <= tol * scale:
            continue
        dists = [abs(w - np.conj(v)) for w in vals]
        if not dists:
            return False
        k = int(np.argmin(dists))
        if dists[k] > tol * scale:
            return False
        vals.pop(k)
    return True


def matexp(M, t: float = 1.0) -> np.ndarray:
    """Matrix exponential ``e^{M t}`` (scaling and squaring, Pade order 13)."""
    M = as_square(M, "M")
    if not np.isfinite(t):
        raise ValueError("t must be finite")
    return scipy.linalg.expm(M * t)


def eig(M) -> Spectrum:
    M = as_square(M, "M")
    try:
        ev = np.linalg.eigvals(M)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"eigenvalue iteration did not converge for a {M.shape} matrix "
            f"with norm {np.linalg.norm(M):.3e}"
        ) from exc
    return Spectrum(ev)


def rank_tol(s: np.ndarray, shape) -> float:
    """Singular-value threshold below which a value counts as zero."""
    if s.size == 0:
        return 0.0
    return float(s[0]) * max(shape) * np.finfo(float).eps * RANK_SAFETY


def rank(M) -> int:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(s > rank_tol(s, M.shape)))


def pinv(M) -> np.ndarray:
    """Moore-Penrose pseudoinverse with the package rank threshold."""
    M = as_matrix(M, "M")
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    keep = s > rank_tol(s, M.shape)
    return (Vt[keep].T / s[keep]) @ U[:, keep].T


def null_basis(M) -> np.ndarray:
    """Orthonormal basis of the right null space, one basis vector per column.

    Full-column-rank input gives an array of shape ``(cols, 0)``.
    """
    M = as_matrix(M, "M")
    _, s, Vt = np.linalg.svd(M, full_matrices=True)
    r = int(np.sum(s > rank_tol(s, M.shape)))
    return Vt[r:].T.copy()


def row_space_basis(M) -> np.ndarray:
    """Orthonormal basis (as columns) of the row space of `M`."""
    M = as_matrix(M, "M")
    _, s, Vt = np.linalg.svd(M, full_matrices=False)
    r = int(np.sum(s > rank_tol(s, M.shape)))
    return Vt[:r].T.copy()


def cond(M) -> float:
    """2-norm condition number; ``inf`` for rank-deficient input."""
    M = as_matrix(M, "M")
    s = np.linalg.svd(M, compute_uv=False)
    if s[-1] <= rank_tol(s, M.shape):
        return float("inf")
    return float(s[0] / s[-1])


def controllability_matrix(A, B) -> np.ndarray:
    A = as_square(A, "A")
    B = as_matrix(B, "B")
    blocks = [B]
    for _ in range(A.shape[0] - 1):
        blocks.append(A @ blocks[-1])
    return np.hstack(blocks)


def is_controllable(A, B) -> bool:
    return rank(controllability_matrix(A, B)) == np.shape(A)[0]


def is_hurwitz(M) -> bool:
    return eig(M).is_hurwitz()


def stability_margin(M) -> float:
    """``-max Re(lambda)``; positive exactly when `M` is Hurwitz."""
    return -eig(M).max_real


def sym(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + M.T)


# -- matrix text format ------------------------------------------------------
#
# First line "rows cols", then one line per row of whitespace-separated
# entries written with 17 significant digits so that reading back is exact.


def format_matrix(M) -> str:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    lines = [f"{M.shape[0]} {M.shape[1]}"]
    lines += [" ".join(f"{v:.17g}" for v in row) for row in M]
    return "\n".join(lines) + "\n"


def write_matrix(path, M) -> None:
    Path(path).write_text(format_matrix(M))


def parse_matrices(text: str) -> list[np.ndarray]:
    """Parse one or more concatenated matrices; blank and '#' lines are skipped."""
    lines = [ln.split() for ln in text.splitlines()
             if ln.strip() and not ln.lstrip().startswith("#")]
    out = []
    pos = 0
    while pos < len(lines):
        header = lines[pos]
        if len(header) != 2:
            raise ValueError(f"bad matrix header {' '.join(header)!r}")
        rows, cols = int(header[0]), int(header[1])
        body = lines[pos + 1:pos + 1 + rows]
        if len(body) != rows:
            raise ValueError("truncated matrix data")
        if any(len(r) != cols for r in body):
            raise ValueError(f"expected {cols} entries on every row")
        out.append(np.array([[float(v) for v in r] for r in body], dtype=float).reshape(rows, cols))
        pos += 1 + rows
    return out


def read_matrix(path) -> np.ndarray:
    mats = parse_matrices(Path(path).read_text())
    if len(mats) != 1:
        raise ValueError(f"{path}: expected one matrix, found {len(mats)}")
    return mats[0]


def dump_matrices(stream: TextIO, *mats) -> None:
    for M in mats:
        stream.write(format_matrix(M))
