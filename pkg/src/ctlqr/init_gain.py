"""Initial stabilizing gain computed from data alone.

With ``F = pinv(X)`` and ``G`` a null-space basis of ``X``, any ``Kbar`` gives
``X (F - G Kbar) = I`` and

    Xtilde (F - G Kbar) = A - B K0,    K0 = -U (F - G Kbar),

so stabilizing the data-only pair ``(Abar, Bbar) = (Xtilde F, Xtilde G)``
stabilizes the plant.  ``(Abar, Bbar)`` is not an estimate of ``(A, B)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
import scipy.signal

from . import linalg
from .data_pipeline import DataMatrices, verify_rank
from .errors import ConfigurationError, DataError, NumericalError, StabilityError
from .linalg import Spectrum
from .matrix_equations import prestabilizing_gain, solve_are
from .simulator import LtiSystem

RANGE_RTOL = 1e-10


@dataclass(frozen=True)
class VirtualSystem:
    Abar: np.ndarray
    Bbar: np.ndarray
    F: np.ndarray
    G: np.ndarray


@dataclass(frozen=True)
class InitialGain:
    K0: np.ndarray
    Kbar: np.ndarray
    spectrum: Spectrum
    condition: float

    def __iter__(self):
        return iter((self.K0, self.Kbar, self.spectrum))


def virtual_system(d: DataMatrices) -> VirtualSystem:
    if not verify_rank(d):
        raise DataError("data matrix [X; U] does not have full row rank")
    F = linalg.pinv(d.X)
    G = linalg.null_basis(d.X)
    return VirtualSystem(Abar=d.Xtilde @ F, Bbar=d.Xtilde @ G, F=F, G=G)


def _check_poles(poles, n: int) -> np.ndarray:
    poles = np.asarray(poles, dtype=complex).ravel()
    if poles.size != n:
        raise ConfigurationError(f"need {n} target poles, got {poles.size}")
    if np.any(poles.real >= 0):
        raise ConfigurationError("target poles must lie in the open left half-plane")
    if not linalg.conjugate_closed(poles):
        raise ConfigurationError("complex target poles must come in conjugate pairs")
    return poles


def _place(Abar, Bbar, poles, scale: float) -> np.ndarray:
    # place_poles needs a full-column-rank input matrix; work on an orthonormal
    # basis of range(Bbar) and map back through its truncated pseudoinverse.
    # Bbar = B U G has rank <= m in exact arithmetic; directions at the
    # rounding level of Xtilde (norm `scale`) are noise.
    U, s, Vt = np.linalg.svd(Bbar, full_matrices=False)
    tol = max(linalg.rank_tol(s, Bbar.shape), RANGE_RTOL * scale)
    r = int(np.sum(s > tol))
    if r == 0:
        raise StabilityError("virtual input matrix has no significant range")
    Qb = U[:, :r]
    try:
        res = scipy.signal.place_poles(Abar, Qb, poles)
    except ValueError as exc:
        raise StabilityError(f"pole placement on the virtual system failed: {exc}") from exc
    return (Vt[:r].T / s[:r]) @ res.gain_matrix


def _lqr_stabilize(Abar, Bbar) -> np.ndarray:
    n, k = Bbar.shape
    K_pre = prestabilizing_gain(Abar, Bbar)
    _, Kbar = solve_are(LtiSystem(Abar, Bbar), np.eye(n), np.eye(k), K0=K_pre)
    return Kbar


def data_stabilizing_gain(d: DataMatrices,
                          pole_spec: Union[str, Sequence[complex], None] = "lqr") -> InitialGain:
    """Compute ``K0 = -U (F - G Kbar)`` with ``Abar - Bbar Kbar`` Hurwitz.

    Parameters
    ----------
    d : DataMatrices
    pole_spec : "lqr", None or sequence of complex
        ``"lqr"``/None: ``Kbar`` is the LQR gain of the virtual pair with
        identity weights.  A sequence: place the closed-loop poles there.

    Returns
    -------
    InitialGain
        ``K0``, ``Kbar``, the spectrum of ``Xtilde (F - G Kbar)`` and
        ``cond(X)`` as a conditioning diagnostic.
    """
    vs = virtual_system(d)
    n = d.n
    if vs.Bbar.shape[1] == 0 or not np.any(vs.Bbar):
        raise StabilityError("virtual input matrix is zero; the data carry no input effect")
    try:
        if pole_spec is None or (isinstance(pole_spec, str) and pole_spec == "lqr"):
            Kbar = _lqr_stabilize(vs.Abar, vs.Bbar)
        elif isinstance(pole_spec, str):
            raise ConfigurationError(f"unknown pole policy {pole_spec!r}")
        else:
            Kbar = _place(vs.Abar, vs.Bbar, _check_poles(pole_spec, n),
                          np.linalg.norm(d.Xtilde, 2))
    except NumericalError as exc:
        raise StabilityError(f"could not stabilize the virtual system: {exc}") from exc
    M = vs.F - vs.G @ Kbar
    K0 = -d.U @ M
    spectrum = linalg.eig(d.Xtilde @ M)
    if not spectrum.is_hurwitz():
        raise StabilityError(
            f"data-based closed loop is not Hurwitz (max Re = {spectrum.max_real:.3e}); "
            f"cond(X) = {linalg.cond(d.X):.3e}")
    return InitialGain(K0=K0, Kbar=Kbar, spectrum=spectrum, condition=linalg.cond(d.X))
