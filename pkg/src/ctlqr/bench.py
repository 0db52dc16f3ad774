"""SYL vs KRO run-time harness on random stable plants.

Per (n, trial): draw a stable controllable plant, collect one PCPE data set,
then run exactly ``iterations`` policy-iteration steps from ``K0 = 0`` with
each Sylvester-transpose solver, timing only the iteration loop.
"""
from __future__ import annotations

import csv
import gc
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import linalg
from .data_pipeline import build_data_matrices, select_columns, verify_rank
from .errors import CtlqrError, GenerationError
from .excitation import gen_pe_sequence
from .learner import data_completion, policy_step
from .matrix_equations import solve_are
from .simulator import LtiSystem, PcpeInput, check_nonpathological, simulate_pcpe

METHODS = {"SYL": "structured", "KRO": "kron"}
MAX_REDRAWS = 100


@dataclass
class BenchConfig:
    dims: list = field(default_factory=lambda: [2, 3, 5, 7])
    m: int = 1
    q_scale: float = 1.0
    r_scale: float = 2.0
    T: float = 0.2
    dt: float = 1e-4
    N: Optional[int] = None
    trials: int = 100
    iterations: int = 10
    seed: int = 0
    quadrature: str = "trapezoid"
    success_tol: float = 1e-4
    # each timed loop is run this many times and the fastest kept
    repeats: int = 3

    def samples(self, n: int) -> int:
        return self.N if self.N is not None else (n + 1) * self.m + n

    @classmethod
    def from_file(cls, path) -> "BenchConfig":
        """Read ``key = value`` lines; ``#`` starts a comment, ``dims`` is comma separated."""
        cfg = cls()
        types = {f.name: f.type for f in fields(cls)}
        for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in types:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            setattr(cfg, key, _parse_value(key, value))
        return cfg


def _parse_value(key, value):
    if key == "dims":
        return [int(v) for v in value.replace(" ", "").split(",") if v]
    if key in ("m", "trials", "iterations", "seed", "repeats"):
        return int(value)
    if key == "N":
        return None if value.lower() in ("", "none", "auto") else int(value)
    if key == "quadrature":
        return value
    return float(value)


@dataclass
class BenchRow:
    n: int
    trial: int
    method: str
    wall_time: float
    error: float
    condition: float
    success: bool
    message: str = ""


@dataclass
class BenchReport:
    config: BenchConfig
    rows: list = field(default_factory=list)
    # final gain per (n, trial, method); kept in memory only
    gains: dict = field(default_factory=dict, repr=False)

    def aggregate(self) -> list:
        """One ``(n, method, mean_time, trials, success_rate)`` tuple per pair.

        ``mean_time`` averages only runs that completed every iteration; a
        solver that aborts early would otherwise look cheap.
        """
        out = []
        for n in self.config.dims:
            for method in METHODS:
                rows = [r for r in self.rows if r.n == n and r.method == method]
                times = [r.wall_time for r in rows if np.isfinite(r.error)]
                mean = float(np.mean(times)) if times else float("nan")
                rate = sum(r.success for r in rows) / len(rows) if rows else float("nan")
                out.append((n, method, mean, len(rows), rate))
        return out

    def mean_time(self, n: int, method: str) -> float:
        for row in self.aggregate():
            if row[0] == n and row[1] == method:
                return row[2]
        raise KeyError((n, method))

    def ratio(self, n: int) -> float:
        return self.mean_time(n, "KRO") / self.mean_time(n, "SYL")

    def success_rate(self, method: Optional[str] = None) -> float:
        rows = [r for r in self.rows if method is None or r.method == method]
        return sum(r.success for r in rows) / len(rows)

    def write_csv(self, path) -> None:
        names = [f.name for f in fields(BenchRow)]
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=names)
            w.writeheader()
            for r in self.rows:
                w.writerow(asdict(r))

    def render_table(self) -> str:
        lines = [
            "Dimension n | Average time (sec)      |",
            "            |     SYL     |     KRO    | KRO/SYL | success SYL/KRO",
            "------------+-------------+------------+---------+----------------",
        ]
        agg = {(n, meth): (t, rate) for n, meth, t, _, rate in self.aggregate()}
        for n in self.config.dims:
            ts, rs = agg[(n, "SYL")]
            tk, rk = agg[(n, "KRO")]
            lines.append(f"{n:^11d} | {ts:11.4g} | {tk:10.4g} | {tk / ts:7.2f} | "
                         f"{rs:6.1%} / {rk:6.1%}")
        return "\n".join(lines) + "\n"


def random_stable_system(n: int, m: int, seed=None) -> LtiSystem:
    """Random Hurwitz, controllable ``(A, B)``.

    Eigenvalues have real parts uniform on [-2, -0.2]; roughly half are
    grouped into complex pairs with imaginary parts uniform on (0, 2].  The
    block-diagonal real form is rotated by a random orthogonal matrix.
    """
    if n < 1 or m < 1:
        raise ValueError("n and m must be positive")
    rng = np.random.default_rng(seed)
    for _ in range(MAX_REDRAWS):
        D = np.zeros((n, n))
        i = 0
        while i < n:
            a = rng.uniform(-2.0, -0.2)
            if i + 1 < n and rng.random() < 0.5:
                b = rng.uniform(0.0, 2.0) or 1.0
                D[i:i + 2, i:i + 2] = [[a, b], [-b, a]]
                i += 2
            else:
                D[i, i] = a
                i += 1
        V, _ = np.linalg.qr(rng.standard_normal((n, n)))
        A = V @ D @ V.T
        B = rng.standard_normal((n, m))
        if linalg.is_controllable(A, B) and linalg.is_hurwitz(A):
            return LtiSystem(A, B)
    raise GenerationError(f"no controllable stable system found in {MAX_REDRAWS} draws")


def run_iterations(sel, Q, R, K0, iterations: int, solver: str) -> list:
    """Exactly `iterations` policy steps; returns ``[K_1, ..., K_iterations]``."""
    K = K0
    gains = []
    completion = data_completion(sel) if solver == "structured" else None
    for _ in range(iterations):
        _, K, _ = policy_step(sel, K, Q, R, solver=solver, completion=completion)
        gains.append(K)
    return gains


def _trial_seed(cfg: BenchConfig, n: int, trial: int):
    return np.random.SeedSequence([cfg.seed, n, trial])


def run_trial(cfg: BenchConfig, n: int, trial: int):
    """Returns ``(rows, gains)`` for one plant; never raises on solver failure."""
    ss = _trial_seed(cfg, n, trial)
    plant_seed, input_seed = ss.spawn(2)
    m = cfg.m
    Q, R = cfg.q_scale * np.eye(n), cfg.r_scale * np.eye(m)
    plant = random_stable_system(n, m, seed=plant_seed)
    _, Kstar = solve_are(plant, Q, R)
    N = cfg.samples(n)
    seq = gen_pe_sequence(m, n + 1, N, seed=input_seed)
    traj = simulate_pcpe(plant, PcpeInput(seq.mu, cfg.T, cfg.dt))
    d = build_data_matrices(traj, cfg.T, mode=cfg.quadrature)
    rows, gains = [], {}
    note = "" if check_nonpathological(linalg.eig(plant.A), cfg.T) else "pathological T; "
    try:
        if not verify_rank(d):
            raise CtlqrError("rank condition failed")
        sel = select_columns(d)
        condition = sel.condition
    except CtlqrError as exc:
        for method in METHODS:
            rows.append(BenchRow(n, trial, method, float("nan"), float("nan"),
                                 linalg.cond(d.Z), False, note + str(exc)))
        return rows, gains
    K0 = np.zeros((m, n))
    order = list(METHODS) if trial % 2 == 0 else list(METHODS)[::-1]
    for method in order:
        elapsed, trace, failure = _timed_run(cfg, sel, Q, R, K0, METHODS[method])
        if trace is None:
            err, ok, msg = float("nan"), False, f"{failure}; cond(Z_eta)={condition:.3e}"
        else:
            err = float(np.linalg.norm(trace[-1] - Kstar) / np.linalg.norm(Kstar))
            ok = err <= cfg.success_tol
            msg = "" if ok else f"error above tolerance; cond(Z_eta)={condition:.3e}"
            gains[method] = trace
        rows.append(BenchRow(n, trial, method, elapsed, err, condition, ok, note + msg))
    rows.sort(key=lambda r: list(METHODS).index(r.method))
    return rows, gains


def _timed_run(cfg: BenchConfig, sel, Q, R, K0, solver: str):
    """Best-of-``cfg.repeats`` wall time of the iteration loop.

    Returns ``(elapsed, trace, failure)``; `trace` is None when the solver
    raised, in which case `elapsed` covers the aborted attempt and `failure`
    describes the error.
    """
    best = float("inf")
    trace = None
    for _ in range(max(1, cfg.repeats)):
        gc_was_enabled = gc.isenabled()
        gc.disable()
        t0 = time.perf_counter()
        try:
            trace = run_iterations(sel, Q, R, K0, cfg.iterations, solver)
        except CtlqrError as exc:
            return time.perf_counter() - t0, None, f"{type(exc).__name__}: {exc}"
        finally:
            if gc_was_enabled:
                gc.enable()
        best = min(best, time.perf_counter() - t0)
    return best, trace, ""


def _run_trial_args(args):
    return run_trial(*args)


def run_benchmark(cfg: BenchConfig, jobs: int = 1, progress=None) -> BenchReport:
    """Run every (n, trial) pair and collect rows.

    ``jobs > 1`` spreads trials over processes, which makes the timing
    columns subject to contention; use ``jobs=1`` for timing runs.
    """
    report = BenchReport(cfg)
    tasks = [(cfg, n, t) for n in cfg.dims for t in range(cfg.trials)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_trial_args, tasks, chunksize=4))
    else:
        results = []
        for task in tasks:
            results.append(run_trial(*task))
            if progress:
                progress(task[1], task[2])
    for (_, n, t), (rows, gains) in zip(tasks, results):
        report.rows.extend(rows)
        for method, trace in gains.items():
            report.gains[(n, t, method)] = trace
    return report
