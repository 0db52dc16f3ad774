"""Lyapunov, Sylvester-transpose and Riccati solvers.

The Sylvester-transpose equation handled here has the shape

    L^T Theta X + X^T Theta^T Rm + C = 0

with ``Theta`` of size ``q x n``, ``X`` of size ``n x p`` (full row rank) and
``L``, ``Rm`` of size ``q x p``.  Three routes are provided:

* ``solve_sylvester_transpose`` (default ``method="structured"``): right
  multiplication by the inverse of a square completion of ``X`` turns the
  equation into ``Pm^T Theta E + E^T Theta^T Pp + C' = 0`` with
  ``E = [I 0]``.  Eliminating the lower block of ``Theta`` leaves a
  T-Sylvester equation ``G^T Y + Y^T H + D = 0`` whose symmetric part is a
  Lyapunov equation and whose skew part is explicit when ``H - G`` is a
  multiple of the identity.  That solve is used as the preconditioner of a
  residual-correction loop, so instances that only approximately have this
  structure still converge (or report stagnation).  Cost per sweep is
  ``O(q^3)``.
* ``method="cgls"``: matrix-form CGLS on the normal equations.
* ``solve_sylvester_transpose_kron``: dense solve of the vectorized system,
  using the commutation matrix for the ``Theta^T`` term.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import linalg
from .errors import (ConvergenceError, DimensionError, SingularityError,
                     StabilityError)

KRON_LYAPUNOV_MAX_N = 50
FLOOR_RTOL = 1e-6


@dataclass(frozen=True)
class SylvesterTransposeProblem:
    """Coefficients ``L``, ``Rm`` (q x p) and constant term ``C`` (p x p)."""

    L: np.ndarray
    Rm: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        L = linalg.as_matrix(self.L, "L")
        Rm = linalg.as_matrix(self.Rm, "Rm")
        C = linalg.as_square(self.C, "C")
        if L.shape != Rm.shape:
            raise DimensionError(f"L {L.shape} and Rm {Rm.shape} must match")
        if C.shape[0] != L.shape[1]:
            raise DimensionError(f"C {C.shape} incompatible with L {L.shape}")
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "Rm", Rm)
        object.__setattr__(self, "C", C)

    @property
    def q(self) -> int:
        return self.L.shape[0]

    @property
    def p(self) -> int:
        return self.L.shape[1]

    def residual(self, Theta, Xeta) -> np.ndarray:
        return self.L.T @ Theta @ Xeta + Xeta.T @ Theta.T @ self.Rm + self.C

    def relative_residual(self, Theta, Xeta) -> float:
        scale = np.linalg.norm(self.C)
        r = np.linalg.norm(self.residual(Theta, Xeta))
        return float(r / scale) if scale > 0 else float(r)


def _check_xeta(prob: SylvesterTransposeProblem, Xeta) -> np.ndarray:
    Xeta = linalg.as_matrix(Xeta, "Xeta")
    if Xeta.shape[1] != prob.p:
        raise DimensionError(f"Xeta {Xeta.shape} incompatible with p={prob.p}")
    if Xeta.shape[0] > prob.q:
        raise DimensionError("Xeta has more rows than Theta")
    return Xeta


# -- Lyapunov -----------------------------------------------------------------


def solve_lyapunov(Acl, W) -> np.ndarray:
    """Solve ``P Acl + Acl^T P + W = 0`` for Hurwitz `Acl`.

    Small problems go through the Kronecker-vectorized system; larger ones
    through Bartels-Stewart.
    """
    Acl = linalg.as_square(Acl, "Acl")
    W = linalg.as_square(W, "W")
    if W.shape != Acl.shape:
        raise DimensionError(f"W {W.shape} does not match Acl {Acl.shape}")
    margin = linalg.stability_margin(Acl)
    if not margin > 0:
        raise StabilityError(
            f"Acl is not Hurwitz (max Re lambda = {-margin:.3e}); "
            "the Lyapunov solution is not guaranteed unique or PSD")
    n = Acl.shape[0]
    if n <= KRON_LYAPUNOV_MAX_N:
        I = np.eye(n)
        M = np.kron(Acl.T, I) + np.kron(I, Acl.T)
        P = np.linalg.solve(M, -W.reshape(-1, order="F")).reshape((n, n), order="F")
    else:
        P = scipy.linalg.solve_continuous_lyapunov(Acl.T, -W)
    return linalg.sym(P)


# -- Sylvester-transpose: Kronecker route ----------------------------------


def commutation_matrix(rows: int, cols: int) -> np.ndarray:
    """Permutation ``K`` with ``vec(M^T) = K vec(M)`` for ``M`` of shape (rows, cols).

    ``vec`` stacks columns.
    """
    K = np.zeros((rows * cols, rows * cols))
    i, j = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
    K[(j + i * cols).ravel(), (i + j * rows).ravel()] = 1.0
    return K


def vectorized_operator(prob: SylvesterTransposeProblem, Xeta) -> np.ndarray:
    """Matrix of ``vec(Theta) -> vec(L^T Theta X + X^T Theta^T Rm)``."""
    Xeta = _check_xeta(prob, Xeta)
    q, n = prob.q, Xeta.shape[0]
    return (np.kron(Xeta.T, prob.L.T)
            + np.kron(prob.Rm.T, Xeta.T) @ commutation_matrix(q, n))


def solve_sylvester_transpose_kron(prob: SylvesterTransposeProblem, Xeta) -> np.ndarray:
    """Direct dense solve of the vectorized Sylvester-transpose equation.

    The system is overdetermined (``p^2`` equations, ``q n`` unknowns) and is
    solved in the least-squares sense; it must have full column rank.
    """
    Xeta = _check_xeta(prob, Xeta)
    q, n = prob.q, Xeta.shape[0]
    M = vectorized_operator(prob, Xeta)
    rhs = -prob.C.reshape(-1, order="F")
    v, _, _, s = np.linalg.lstsq(M, rhs, rcond=None)
    if s.size < q * n or s[-1] <= linalg.rank_tol(s, M.shape):
        raise SingularityError(
            "vectorized Sylvester-transpose operator is rank deficient "
            f"(smallest singular value {s[-1] if s.size else 0.0:.3e})")
    return v.reshape((q, n), order="F")


# -- Sylvester-transpose: structured route ----------------------------------


def _completion_rows(X, candidates, k):
    """`k` rows of `candidates` that together with `X` span the most volume.

    Rows are ranked by pivoted QR of their components orthogonal to the row
    space of `X`; the original rows (not the projections) are returned.
    Completing with rows of the equation's own coefficients keeps the
    transformed lower-left block near zero, which avoids cancellation in the
    block elimination when `X` is ill-conditioned.
    """
    if k == 0:
        return np.zeros((0, X.shape[1]))
    Qx, _ = np.linalg.qr(X.T)
    proj = candidates - (candidates @ Qx) @ Qx.T
    _, R, piv = scipy.linalg.qr(proj.T, mode="economic", pivoting=True)
    if R.shape[1] < k or abs(R[k - 1, k - 1]) <= linalg.rank_tol(np.abs(np.diag(R)), proj.shape):
        raise SingularityError("coefficients do not complete Xeta to a nonsingular matrix")
    return candidates[np.sort(piv[:k])]


_trsyl, _getrs, _gees = scipy.linalg.get_lapack_funcs(("trsyl", "getrs", "gees"),
                                                      (np.zeros((1, 1)),))


def _real_schur(M):
    """``(T, U)`` with ``M = U T U^T``; thin wrapper over LAPACK ``gees``."""
    k = M.shape[0]
    T, _, _, _, U, _, info = _gees(lambda re, im: None, M, lwork=max(1, 3 * k), sort_t=0)
    if info != 0:
        raise SingularityError("real Schur decomposition failed to converge")
    return T, U


class Completion:
    """LU factors of a square matrix ``[Xeta; rows]``.

    The structured solver needs some nonsingular completion of ``Xeta``.
    Callers that solve many equations with the same ``Xeta`` (and know a
    well-conditioned completion) build one of these once and pass it in.
    """

    def __init__(self, Xeta, rows):
        Xeta = linalg.as_matrix(Xeta, "Xeta")
        rows = np.asarray(rows, dtype=float).reshape(-1, Xeta.shape[1])
        Xhat = np.vstack([Xeta, rows])
        if Xhat.shape[0] != Xhat.shape[1]:
            raise DimensionError(f"completion {Xhat.shape} is not square")
        try:
            self.lu = scipy.linalg.lu_factor(Xhat, check_finite=False)
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise SingularityError("Xeta cannot be completed to a nonsingular matrix") from exc
        if not np.all(np.diag(self.lu[0]) != 0):
            raise SingularityError("Xeta cannot be completed to a nonsingular matrix")
        self.Xeta = Xeta
        self.size = Xhat.shape[0]

    def right_divide(self, M) -> np.ndarray:
        """``M Xhat^{-1}``."""
        return _getrs(self.lu[0], self.lu[1], M.T, trans=1)[0].T

    def left_divide_transpose(self, M) -> np.ndarray:
        """``Xhat^{-T} M``."""
        return _getrs(self.lu[0], self.lu[1], M, trans=1)[0]


class _Reduced:
    """Equation transformed to ``Pm^T Theta E + E^T Theta^T Pp + Ct = 0``."""

    def __init__(self, prob: SylvesterTransposeProblem, Xeta: np.ndarray, completion=None):
        n = Xeta.shape[0]
        q, p = prob.q, prob.p
        L, Rm, X, C = prob.L, prob.Rm, Xeta, prob.C
        if completion is not None and completion.size != p:
            raise DimensionError(f"completion has size {completion.size}, expected {p}")
        if p > q:
            # compress onto the dominant q-dimensional row space of [L; Rm]
            _, _, Vt = np.linalg.svd(np.vstack([L, Rm]), full_matrices=False)
            V = Vt[:q].T
            L, Rm, X, C = L @ V, Rm @ V, X @ V, V.T @ C @ V
            completion = None
        elif p < q:
            raise DimensionError(f"p={p} < q={q}: equation is underdetermined")
        if completion is None:
            completion = Completion(X, _completion_rows(X, np.vstack([L, Rm]), q - n))
        self.n, self.q = n, q
        # Pm = L Xhat^{-1}, Pp = Rm Xhat^{-1}, Ct = Xhat^{-T} C Xhat^{-1}
        PmPp = completion.right_divide(np.concatenate((L, Rm)))
        self.Pm, self.Pp = PmPp[:q], PmPp[q:]
        self.Ct = completion.left_divide_transpose(completion.right_divide(C))

        m = q - n
        M11, M12 = self.Pm[:n, :n], self.Pm[:n, n:]
        M21, M22 = self.Pm[n:, :n], self.Pm[n:, n:]
        P11, P21 = self.Pp[:n, :n], self.Pp[n:, :n]
        if m:
            try:
                M22inv = np.linalg.inv(M22)
            except np.linalg.LinAlgError as exc:
                raise SingularityError("input block of the reduced equation is singular") from exc
            self.M22invT = M22inv.T
            self.M22inv_M21 = M22inv @ M21
            self.M22inv_P21 = M22inv @ P21
            self.M12 = M12
            self.G = M11 - M12 @ self.M22inv_M21
            H = P11 - M12 @ self.M22inv_P21
        else:
            self.G, H = M11, P11
        self.sigma = float(np.trace(H - self.G)) / (2 * n)
        if abs(self.sigma) <= 1e-12 * max(1.0, np.linalg.norm(self.G)):
            raise SingularityError(
                "structured splitting needs H - G to have nonzero mean diagonal")
        # Bartels-Stewart for F^T S + S F = -rhs; the Schur form of F^T is
        # shared by every sweep
        F = self.G + self.sigma * np.eye(n)
        self.T, self.U = _real_schur(F.T)

    def residual(self, Theta):
        n = self.n
        R = self.Ct.copy()
        R[:, :n] += self.Pm.T @ Theta
        R[:n, :] += Theta.T @ self.Pp
        return R

    def _lyapunov(self, rhs):
        U = self.U
        y, scale, info = _trsyl(self.T, self.T, U.T @ (-rhs) @ U, tranb="T")
        if info < 0 or not scale > 0:
            raise SingularityError("Lyapunov stage of the structured solve failed")
        S = U @ (y / scale) @ U.T
        return 0.5 * (S + S.T)

    def precondition(self, Rhat) -> np.ndarray:
        """Solve the surrogate with ``H := G + 2 sigma I`` and constant term `Rhat`."""
        n = self.n
        C11, C21 = Rhat[:n, :n], Rhat[n:, :n]
        if self.q > n:
            D = C11 - self.M22inv_M21.T @ C21 - C21.T @ self.M22inv_P21
        else:
            D = C11
        W = (D - D.T) / (4 * self.sigma)
        G = self.G
        Y = self._lyapunov(G.T @ W - W @ G + 0.5 * (D + D.T)) + W
        if self.q > n:
            Theta2 = -self.M22invT @ (C21 + self.M12.T @ Y)
            return np.concatenate((Y, Theta2))
        return Y


def _structured(prob, Xeta, tol, max_iters, Theta0, completion=None):
    red = _Reduced(prob, Xeta, completion)
    scale = np.linalg.norm(prob.C)
    Theta = np.zeros((prob.q, Xeta.shape[0])) if Theta0 is None else np.array(Theta0, dtype=float)
    best, best_res, stalls = Theta, np.inf, 0
    res = np.inf
    from_zero = Theta0 is None
    for _ in range(max_iters):
        Rhat = red.Ct if from_zero else red.residual(Theta)
        from_zero = False
        Theta = Theta + red.precondition(Rhat)
        res = np.linalg.norm(prob.residual(Theta, Xeta)) / scale
        if res <= tol:
            return Theta, res
        if res < 0.5 * best_res:
            stalls = 0
        else:
            stalls += 1
            if stalls >= 3:
                break
        if res < best_res:
            best, best_res = Theta, res
    raise ConvergenceError(
        f"structured Sylvester-transpose iteration stagnated at relative residual "
        f"{best_res:.3e} (tol {tol:.1e})", residual=best_res)


def _cgls(prob, Xeta, tol, max_iters, Theta0):
    L, Rm, X = prob.L, prob.Rm, Xeta
    scale = np.linalg.norm(prob.C)

    def op(T):
        return L.T @ T @ X + X.T @ T.T @ Rm

    def adj(S):
        return (L @ S + Rm @ S.T) @ X.T

    Theta = np.zeros((prob.q, X.shape[0])) if Theta0 is None else np.array(Theta0, dtype=float)
    r = -prob.C - op(Theta)
    s = adj(r)
    d = s.copy()
    gamma = np.sum(s * s)
    gamma0 = gamma
    res = np.linalg.norm(r) / scale
    for _ in range(max_iters):
        if res <= tol:
            return Theta, res
        if gamma <= (np.finfo(float).eps ** 2) * gamma0:
            break
        w = op(d)
        alpha = gamma / np.sum(w * w)
        Theta = Theta + alpha * d
        r = r - alpha * w
        s = adj(r)
        gamma_new = np.sum(s * s)
        d = s + (gamma_new / gamma) * d
        gamma = gamma_new
        res = np.linalg.norm(r) / scale
    # recurrence residual can drift; confirm against the true residual
    res = prob.relative_residual(Theta, X)
    if res <= tol:
        return Theta, res
    raise ConvergenceError(
        f"CGLS stopped at relative residual {res:.3e} (tol {tol:.1e})", residual=res)


def solve_sylvester_transpose(prob: SylvesterTransposeProblem, Xeta, tol: float = 1e-10,
                              max_iters: int = 10000, method: str = "structured",
                              Theta0=None, completion=None, full_output: bool = False):
    """Iteratively solve ``L^T Theta X + X^T Theta^T Rm + C = 0`` for ``Theta``.

    Parameters
    ----------
    prob : SylvesterTransposeProblem
    Xeta : ndarray, shape (n, p)
        Right multiplier; must have full row rank.
    tol : float
        Stop once ``||residual||_F <= tol * ||C||_F``.
    max_iters : int
        Sweep budget (refinement sweeps or CGLS steps).
    method : {"structured", "cgls"}
    Theta0 : ndarray, optional
        Starting guess.
    completion : Completion, optional
        Precomputed square completion of `Xeta` (structured method only).
    full_output : bool
        Also return the final relative residual.

    Raises
    ------
    ConvergenceError
        Residual stagnates above `tol`; carries the last residual.
    SingularityError
        The reduced equation is singular (structured method only).
    """
    Xeta = _check_xeta(prob, Xeta)
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not np.any(prob.C):
        Theta, res = np.zeros((prob.q, Xeta.shape[0])), 0.0
    elif method == "structured":
        Theta, res = _structured(prob, Xeta, tol, max_iters, Theta0, completion)
    elif method == "cgls":
        Theta, res = _cgls(prob, Xeta, tol, max_iters, Theta0)
    else:
        raise ValueError(f"unknown method {method!r}")
    return (Theta, res) if full_output else Theta


# -- Riccati ----------------------------------------------------------------


def prestabilizing_gain(A, B, shift: float = 1.0) -> np.ndarray:
    """Gain ``K`` with ``A - B K`` Hurwitz that moves only the unstable modes.

    An ordered real Schur form ``A = V [[Ts, T12], [0, Tu]] V^T`` isolates the
    eigenvalues with nonnegative real part in ``Tu``.  On that block the
    shifted-Lyapunov (Bass) construction is used: with
    ``beta = shift + max(0, -min Re lambda(Tu))``, solve
    ``(Tu + beta I) P + P (Tu + beta I)^T = 2 Bu Bu^T`` and take
    ``Ku = Bu^T P^{-1}``, which places the unstable modes at real part
    ``-beta``.  The stable modes are untouched.  Requires ``(A, B)``
    stabilizable; Hurwitz `A` returns zero.
    """
    A = linalg.as_square(A, "A")
    B = linalg.as_matrix(B, "B")
    n, m = B.shape
    T, V, k = scipy.linalg.schur(A, output="real", sort="lhp")
    if k == n:
        return np.zeros((m, n))
    Tu = T[k:, k:]
    Bu = (V.T @ B)[k:]
    beta = shift + max(0.0, -float(np.min(linalg.eig(Tu).eigenvalues.real)))
    As = Tu + beta * np.eye(n - k)
    P = solve_lyapunov(-As.T, 2.0 * Bu @ Bu.T)
    try:
        Ku = np.linalg.solve(P, Bu).T
    except np.linalg.LinAlgError as exc:
        raise SingularityError("unstable modes are not controllable") from exc
    K = np.hstack([np.zeros((m, k)), Ku]) @ V.T
    if not linalg.is_hurwitz(A - B @ K):
        raise StabilityError("shifted-Lyapunov gain failed to stabilize (ill-conditioned pair)")
    return K


def are_residual(A, B, Q, R, P) -> np.ndarray:
    return Q + P @ A + A.T @ P - P @ B @ np.linalg.solve(R, B.T @ P)


def solve_are(sys, Q, R, K0=None, tol: float = 1e-12, max_iters: int = 100):
    """Stabilizing solution of the continuous-time ARE by Newton-Kleinman steps.

    `K0` defaults to zero for Hurwitz ``A`` and to ``prestabilizing_gain``
    otherwise.  Iterates until ``||K_{i+1} - K_i|| <= tol * max(1, ||K_i||)``,
    or until the gap stops shrinking below ``FLOOR_RTOL`` relative (the
    rounding floor of an ill-conditioned Lyapunov solve).

    Returns
    -------
    (P, K) : tuple of ndarray
    """
    A, B = linalg.as_square(sys.A, "A"), linalg.as_matrix(sys.B, "B")
    Q, R = linalg.as_square(Q, "Q"), linalg.as_square(R, "R")
    n, m = B.shape
    if K0 is None:
        K = np.zeros((m, n)) if linalg.is_hurwitz(A) else prestabilizing_gain(A, B)
    else:
        K = linalg.as_matrix(K0, "K0")
        if not linalg.is_hurwitz(A - B @ K):
            raise StabilityError("K0 is not stabilizing")
    prev = np.inf
    for _ in range(max_iters):
        P = solve_lyapunov(A - B @ K, Q + K.T @ R @ K)
        K_next = np.linalg.solve(R, B.T @ P)
        gap = np.linalg.norm(K_next - K)
        K = K_next
        scale = max(1.0, np.linalg.norm(K))
        if gap <= tol * scale:
            break
        # Newton steps stop improving once rounding dominates
        if gap >= prev and gap <= FLOOR_RTOL * scale:
            break
        prev = gap
    else:
        raise ConvergenceError(f"Kleinman iteration for the ARE did not settle (gap {gap:.3e})",
                               residual=gap)
    P = solve_lyapunov(A - B @ K, Q + K.T @ R @ K)
    return P, np.linalg.solve(R, B.T @ P)
