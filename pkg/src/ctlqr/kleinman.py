"""Model-based policy iteration: Kleinman's method and its Sylvester-transpose form.

Both serve as per-iteration oracles for the data-driven learner.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import ConsistencyError, StabilityError
from .matrix_equations import (SylvesterTransposeProblem, solve_lyapunov,
                               solve_sylvester_transpose,
                               solve_sylvester_transpose_kron)
from .simulator import LtiSystem

DEFAULT_EPS = 1e-10
DEFAULT_MAX_ITERS = 50


@dataclass(frozen=True)
class IterationRecord:
    """One policy-iteration step ``i``.

    ``P`` is the value matrix of the previous gain ``K_{i-1}`` and ``K`` the
    improved gain ``K_i``.  ``stability_margin`` is ``-max Re lambda(A - B K_i)``
    and is NaN when no model is available.
    """

    index: int
    K: np.ndarray
    P: np.ndarray
    gap: float
    residual: float
    stability_margin: float = math.nan

    @property
    def Theta(self) -> np.ndarray:
        return np.vstack([self.P, self.K])


@dataclass
class IterationTrace:
    K0: np.ndarray
    records: list = field(default_factory=list)
    converged: bool = False

    def __len__(self):
        return len(self.records)

    @property
    def final_gap(self) -> float:
        return self.records[-1].gap if self.records else math.inf

    @property
    def gains(self) -> list:
        """``[K_0, K_1, ...]``."""
        return [self.K0] + [r.K for r in self.records]

    @property
    def values(self) -> list:
        """``[P_0, P_1, ...]`` (value matrices of ``K_0, K_1, ...``)."""
        return [r.P for r in self.records]

    def monotone_violation(self) -> float:
        """Largest negative eigenvalue of ``P_i - P_{i+1}`` over the chain (0 if none)."""
        worst = 0.0
        for a, b in zip(self.values, self.values[1:]):
            worst = min(worst, float(np.min(np.linalg.eigvalsh(linalg.sym(a - b)))))
        return worst


def write_trace_csv(path, trace: IterationTrace) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "gap", "residual", "stability_margin"])
        for r in trace.records:
            w.writerow([r.index, f"{r.gap:.17g}", f"{r.residual:.17g}",
                        f"{r.stability_margin:.17g}"])


def _require_stabilizing(sys: LtiSystem, K) -> None:
    margin = linalg.stability_margin(sys.closed_loop(K))
    if not margin > 0:
        raise StabilityError(f"gain is not stabilizing (max Re lambda = {-margin:.3e})")


def kleinman_iterate(sys: LtiSystem, Q, R, K0, eps: float = DEFAULT_EPS,
                     max_iters: int = DEFAULT_MAX_ITERS) -> IterationTrace:
    """Alternate the Lyapunov solve and the gain update until ``||K_{i+1} - K_i|| <= eps``."""
    Q, R = np.atleast_2d(Q), np.atleast_2d(R)
    K = np.atleast_2d(np.asarray(K0, dtype=float))
    _require_stabilizing(sys, K)
    trace = IterationTrace(K0=K.copy())
    A, B = sys.A, sys.B
    for i in range(1, max_iters + 1):
        Acl = A - B @ K
        W = Q + K.T @ R @ K
        P = solve_lyapunov(Acl, W)
        res = np.linalg.norm(P @ Acl + Acl.T @ P + W) / max(np.linalg.norm(W), 1e-300)
        K_next = np.linalg.solve(R, B.T @ P)
        gap = float(np.linalg.norm(K_next - K))
        trace.records.append(IterationRecord(
            i, K_next, P, gap, float(res), linalg.stability_margin(A - B @ K_next)))
        K = K_next
        if gap <= eps:
            trace.converged = True
            break
    return trace


def model_matrices(sys: LtiSystem, Q, R, Ki):
    """``(Phi_minus, Phi_plus, E, Qbar)`` of the model-based Sylvester-transpose equation."""
    n, m = sys.n, sys.m
    Q, R, Ki = np.atleast_2d(Q), np.atleast_2d(R), np.atleast_2d(Ki)
    bottom = np.hstack([-R @ Ki, -R])
    I = np.eye(n)
    Phi_minus = np.vstack([np.hstack([sys.A - I, sys.B]), bottom])
    Phi_plus = np.vstack([np.hstack([sys.A + I, sys.B]), bottom])
    E = np.hstack([I, np.zeros((n, m))])
    Qbar = np.zeros((n + m, n + m))
    Qbar[:n, :n] = Q + Ki.T @ R @ Ki
    return Phi_minus, Phi_plus, E, Qbar


def algorithm1_step(sys: LtiSystem, Q, R, Ki, solver: str = "structured") -> np.ndarray:
    """Solve ``Phi-^T Theta E + E^T Theta^T Phi+ + Qbar = 0`` for ``Theta = [P_i; K_{i+1}]``.

    `solver` is ``"structured"``, ``"cgls"`` or ``"kron"``.
    """
    _require_stabilizing(sys, Ki)
    Pm, Pp, E, Qbar = model_matrices(sys, Q, R, Ki)
    prob = SylvesterTransposeProblem(Pm, Pp, Qbar)
    if solver == "kron":
        Theta = solve_sylvester_transpose_kron(prob, E)
    else:
        Theta = solve_sylvester_transpose(prob, E, method=solver)
    top = Theta[:sys.n]
    if np.linalg.norm(top - top.T) > 1e-7 * max(np.linalg.norm(top), 1e-300):
        raise ConsistencyError("value block of the model-based solution is not symmetric")
    return Theta


def algorithm1(sys: LtiSystem, Q, R, K0, eps: float = DEFAULT_EPS,
               max_iters: int = DEFAULT_MAX_ITERS, solver: str = "structured") -> IterationTrace:
    """Chain :func:`algorithm1_step` until the gain settles."""
    n = sys.n
    K = np.atleast_2d(np.asarray(K0, dtype=float))
    trace = IterationTrace(K0=K.copy())
    for i in range(1, max_iters + 1):
        Theta = algorithm1_step(sys, Q, R, K, solver=solver)
        P, K_next = linalg.sym(Theta[:n]), Theta[n:]
        gap = float(np.linalg.norm(K_next - K))
        trace.records.append(IterationRecord(
            i, K_next, P, gap, math.nan, linalg.stability_margin(sys.closed_loop(K_next))))
        K = K_next
        if gap <= eps:
            trace.converged = True
            break
    return trace
