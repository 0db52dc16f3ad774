"""Data-based off-policy policy iteration for continuous-time LQR.

Every iteration solves, from the once-collected data only,

    (Y-)^T Theta X_eta + X_eta^T Theta^T Y+ + Q_i = 0

for ``Theta = [P; K_next]``, where

    Y-  = [Xtilde_eta - X_eta; -R K_i X_eta - R U_eta]
    Y+  = [Xtilde_eta + X_eta; -R K_i X_eta - R U_eta]
    Q_i = X_eta^T (Q + K_i^T R K_i) X_eta.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import linalg
from .data_pipeline import (ColumnSelection, DataMatrices, full_selection,
                            select_columns, verify_rank)
from .errors import (ConsistencyError, ConvergenceError, DataError,
                     NumericalError, SingularityError, StabilityError)
from .kleinman import DEFAULT_EPS, DEFAULT_MAX_ITERS, IterationRecord, IterationTrace
from .matrix_equations import (Completion, SylvesterTransposeProblem,
                               solve_sylvester_transpose,
                               solve_sylvester_transpose_kron)

SYMMETRY_RTOL = 1e-7
# asymmetry a backward-stable solve may leave per unit of cond(Z_eta)
SYMMETRY_PER_COND = 1e-9
SOLVER_TOL = 1e-10
FALLBACK_TOL = 1e-6
SOLVERS = ("structured", "cgls", "kron")


@dataclass
class LearnedPolicy:
    K: np.ndarray
    P: np.ndarray
    trace: IterationTrace
    selection: ColumnSelection
    used_full_data: bool = False


def build_iteration_matrices(sel: ColumnSelection, Ki, Q, R):
    """Return ``(Y-, Y+, Q_i)`` for the current gain `Ki`."""
    Q, R, Ki = np.atleast_2d(Q), np.atleast_2d(R), np.atleast_2d(Ki)
    Xe, Ue, Xte = sel.Xeta, sel.Ueta, sel.Xtilde_eta
    n, m = Xe.shape[0], Ue.shape[0]
    if Ki.shape != (m, n) or Q.shape != (n, n) or R.shape != (m, m):
        raise ValueError(f"expected K {(m, n)}, Q {(n, n)}, R {(m, m)}; got "
                         f"{Ki.shape}, {Q.shape}, {R.shape}")
    bottom = -R @ (Ki @ Xe + Ue)
    Yminus = np.concatenate((Xte - Xe, bottom))
    Yplus = np.concatenate((Xte + Xe, bottom))
    Qi = Xe.T @ (Q + Ki.T @ R @ Ki) @ Xe
    return Yminus, Yplus, linalg.sym(Qi)


def extract_policy(Theta, n: int, rtol: float = SYMMETRY_RTOL):
    """Split ``Theta`` into the symmetrized value block ``P`` and gain ``K``."""
    Theta = np.atleast_2d(Theta)
    if Theta.shape[0] <= n:
        raise ValueError(f"Theta has {Theta.shape[0]} rows; expected n + m > {n}")
    top = Theta[:n]
    asym = np.linalg.norm(top - top.T)
    if asym > rtol * np.linalg.norm(top):
        raise ConsistencyError(
            f"value block asymmetry {asym:.3e} exceeds {rtol:.0e} relative; "
            "data or solve is inconsistent")
    return linalg.sym(top), Theta[n:].copy()


def symmetry_tolerance(condition: float) -> float:
    """Asymmetry guard for a column selection with ``cond(Z_eta) = condition``."""
    return max(SYMMETRY_RTOL, SYMMETRY_PER_COND * condition)


def data_completion(sel: ColumnSelection):
    """``Z_eta`` as the square completion of ``X_eta``; ``None`` if not square."""
    if sel.Zeta.shape[0] != sel.Zeta.shape[1]:
        return None
    return Completion(sel.Xeta, sel.Ueta)


def _solve(sel, Ki, Q, R, solver, tol, completion=None):
    Ym, Yp, Qi = build_iteration_matrices(sel, Ki, Q, R)
    prob = SylvesterTransposeProblem(Ym, Yp, Qi)
    if solver == "kron":
        Theta = solve_sylvester_transpose_kron(prob, sel.Xeta)
        return Theta, prob.relative_residual(Theta, sel.Xeta)
    return solve_sylvester_transpose(prob, sel.Xeta, tol=tol, method=solver,
                                     completion=completion, full_output=True)


def policy_step(sel: ColumnSelection, Ki, Q, R, solver: str = "structured",
                tol: float = SOLVER_TOL, completion=None):
    """One iteration: returns ``(P_i, K_{i+1}, relative residual)``.

    `completion` (see :func:`data_completion`) can be reused across
    iterations on the same selection.
    """
    Theta, res = _solve(sel, Ki, Q, R, solver, tol, completion)
    P, K = extract_policy(Theta, sel.Xeta.shape[0], symmetry_tolerance(sel.condition))
    return P, K, res


def _value_is_indefinite(P) -> bool:
    w = np.linalg.eigvalsh(P)
    return w[0] < -1e-8 * max(abs(w[-1]), 1e-300)


def algorithm2(d: DataMatrices, Q, R, K0=None, eps: float = DEFAULT_EPS,
               max_iters: int = DEFAULT_MAX_ITERS, solver: str = "structured",
               selection: Optional[ColumnSelection] = None,
               tol: float = SOLVER_TOL, fixed_iterations: bool = False) -> LearnedPolicy:
    """Learn the LQR gain from data ``(Xtilde, X, U)`` without a model.

    Parameters
    ----------
    d : DataMatrices
    Q, R : array_like
        Cost weights (``Q`` PSD, ``R`` PD).
    K0 : array_like, optional
        Stabilizing initial gain; zero by default.
    eps : float
        Stop when ``||K_{i+1} - K_i||_F <= eps``.
    max_iters : int
    solver : {"structured", "cgls", "kron"}
        Sylvester-transpose solver; ``"kron"`` is the vectorized baseline.
    selection : ColumnSelection, optional
        Reuse a precomputed column selection.
    fixed_iterations : bool
        Run exactly `max_iters` iterations, ignoring `eps`.

    Raises
    ------
    DataError
        ``[X; U]`` lacks full row rank.
    StabilityError
        A value matrix comes out indefinite, i.e. the gain fed to that
        iteration was not stabilizing.
    ConvergenceError
        The equation could not be solved to tolerance, even on all columns.
    """
    if solver not in SOLVERS:
        raise ValueError(f"solver must be one of {SOLVERS}")
    if not verify_rank(d):
        raise DataError(f"data matrix [X; U] does not have full row rank {d.n + d.m}")
    n, m = d.n, d.m
    Q, R = np.atleast_2d(np.asarray(Q, dtype=float)), np.atleast_2d(np.asarray(R, dtype=float))
    K = np.zeros((m, n)) if K0 is None else np.atleast_2d(np.asarray(K0, dtype=float))
    if K.shape != (m, n):
        raise ValueError(f"K0 must have shape {(m, n)}, got {K.shape}")
    sel = select_columns(d) if selection is None else selection
    completion = data_completion(sel) if solver == "structured" else None
    trace = IterationTrace(K0=K.copy())
    used_full = False
    full = None

    for i in range(1, max_iters + 1):
        try:
            Theta, res = _solve(sel, K, Q, R, solver, tol, completion)
        except (ConvergenceError, SingularityError) as first:
            # Any full-row-rank column set gives the same solution in exact arithmetic.
            full = full or full_selection(d)
            try:
                Theta, res = _solve(full, K, Q, R, solver, tol)
            except NumericalError:
                Theta, res = None, math.inf
            if Theta is None or res > FALLBACK_TOL:
                raise ConvergenceError(
                    f"iteration {i}: Sylvester-transpose solve failed ({first}); "
                    f"cond(Z_eta) = {sel.condition:.3e}",
                    residual=getattr(first, "residual", math.nan),
                    condition=sel.condition) from first
            used_full = True
        try:
            P, K_next = extract_policy(Theta, n, symmetry_tolerance(sel.condition))
        except ConsistencyError as exc:
            raise ConsistencyError(f"iteration {i}: {exc}; cond(Z_eta) = {sel.condition:.3e}") from exc
        if _value_is_indefinite(P):
            raise StabilityError(
                f"iteration {i}: value matrix is indefinite, so the gain K_{i - 1} "
                "is not stabilizing")
        gap = float(np.linalg.norm(K_next - K))
        trace.records.append(IterationRecord(i, K_next, P, gap, res))
        K = K_next
        if not fixed_iterations and gap <= eps:
            trace.converged = True
            break
    if fixed_iterations:
        trace.converged = trace.final_gap <= eps
    return LearnedPolicy(K=K, P=trace.records[-1].P, trace=trace, selection=sel,
                         used_full_data=used_full)
