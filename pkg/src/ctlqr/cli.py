"""Command-line entry point: ``ctlqr {collect,learn,init-gain,bench,verify}``.

Stages chain through files::

    ctlqr --seed 1 --out-dir run collect --random 3 1
    ctlqr --out-dir run init-gain --bundle run/bundle
    ctlqr --out-dir run learn --bundle run/bundle --K0 run/K0.txt

Every run writes ``<command>.manifest.json`` next to its outputs.  Exit
codes: 0 success, 2 usage/configuration, 3 data/rank, 4 solver, 5 stability.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, linalg
from .bench import BenchConfig, random_stable_system, run_benchmark
from .data_pipeline import (build_data_matrices, model_residual, read_bundle,
                            select_columns, verify_rank, write_bundle)
from .errors import ConfigurationError, ConvergenceError, CtlqrError, DataError, RankError
from .excitation import gen_pe_sequence, is_pe, read_sequence, write_sequence
from .init_gain import data_stabilizing_gain
from .kleinman import write_trace_csv
from .learner import SOLVERS, algorithm2
from .simulator import (LtiSystem, PcpeInput, check_nonpathological,
                        simulate_pcpe, write_trajectory_csv)

log = logging.getLogger("ctlqr")

EXIT_OK = 0
EXIT_USAGE = 2
SMOKE_TRIALS = 10


# -- helpers -------------------------------------------------------------------


def read_config(path) -> dict:
    """``key = value`` lines; ``#`` comments.  Values stay strings."""
    out = {}
    if path is None:
        return out
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _opt(args, config: dict, name: str, default, kind=float):
    """Command-line value, else config value, else `default`."""
    value = getattr(args, name, None)
    if value is not None:
        return value
    if name in config:
        try:
            return kind(config[name])
        except ValueError as exc:
            raise ConfigurationError(f"config key {name}: {exc}") from exc
    return default


def _read_system(path) -> LtiSystem:
    try:
        mats = linalg.parse_matrices(Path(path).read_text())
    except OSError as exc:
        raise ConfigurationError(f"cannot read system file {path}: {exc}") from exc
    except ValueError as exc:
        raise ConfigurationError(f"malformed system file {path}: {exc}") from exc
    if len(mats) != 2:
        raise ConfigurationError(f"{path}: expected two matrices (A then B), found {len(mats)}")
    return LtiSystem(*mats)


def _read_matrix_arg(path, what: str):
    try:
        return linalg.read_matrix(path)
    except OSError as exc:
        raise ConfigurationError(f"cannot read {what} file {path}: {exc}") from exc
    except ValueError as exc:
        raise ConfigurationError(f"malformed {what} file {path}: {exc}") from exc


def _weights(args, n: int, m: int):
    Q = _read_matrix_arg(args.Q, "Q") if args.Q else args.q_scale * np.eye(n)
    R = _read_matrix_arg(args.R, "R") if args.R else args.r_scale * np.eye(m)
    if Q.shape != (n, n) or R.shape != (m, m):
        raise ConfigurationError(f"Q must be {n}x{n} and R {m}x{m}; got {Q.shape}, {R.shape}")
    if np.linalg.eigvalsh(linalg.sym(R))[0] <= 0:
        raise ConfigurationError("R must be positive definite")
    return Q, R


def _parse_poles(text: str):
    if text.strip().lower() == "lqr":
        return "lqr"
    try:
        return [complex(p.replace(" ", "")) for p in text.split(",") if p.strip()]
    except ValueError as exc:
        raise ConfigurationError(f"cannot parse poles {text!r}: {exc}") from exc


def write_manifest(out_dir: Path, command: str, args, inputs: dict, outputs: dict,
                   extra: dict | None = None) -> Path:
    manifest = {
        "command": command,
        "argv": list(getattr(args, "argv", [])),
        "config": str(args.config) if args.config else None,
        "seed": args.seed,
        "inputs": {k: str(v) for k, v in inputs.items()},
        "outputs": {k: str(v) for k, v in outputs.items()},
        "version": __version__,
        "numpy": np.__version__,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }
    if extra:
        manifest.update(extra)
    path = out_dir / f"{command}.manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n")
    return path


# -- subcommands ------------------------------------------------------------


def cmd_collect(args, config: dict) -> int:
    out = args.out_dir
    ss = np.random.SeedSequence(args.seed)
    plant_seed, input_seed = ss.spawn(2)
    if args.system:
        plant = _read_system(args.system)
    elif args.random:
        n, m = args.random
        plant = random_stable_system(n, m, seed=plant_seed)
    else:
        raise ConfigurationError("collect needs --system FILE or --random N M")
    plant.require_controllable()
    n, m = plant.n, plant.m
    T = _opt(args, config, "T", 0.2)
    dt = _opt(args, config, "dt", 1e-4)
    order = _opt(args, config, "order", n + 1, int)
    N = _opt(args, config, "samples", (n + 1) * m + n, int)
    mode = _opt(args, config, "quadrature", "auto", str)
    seq = gen_pe_sequence(m, order, N, seed=input_seed)
    if not check_nonpathological(linalg.eig(plant.A), T):
        log.warning("sampling period T=%g is pathological for this plant", T)
    traj = simulate_pcpe(plant, PcpeInput(seq.mu, T, dt))
    d = build_data_matrices(traj, T, mode=mode, seed=args.seed)
    if not verify_rank(d):
        raise RankError(f"collected [X; U] has rank below n + m = {n + m}")

    out.mkdir(parents=True, exist_ok=True)
    files = {
        "system": out / "system.txt",
        "sequence": out / "mu.txt",
        "trajectory": out / "trajectory.csv",
        "bundle": out / "bundle",
    }
    with open(files["system"], "w") as fh:
        linalg.dump_matrices(fh, plant.A, plant.B)
    write_sequence(files["sequence"], seq.mu)
    write_trajectory_csv(files["trajectory"], traj)
    write_bundle(files["bundle"], d, extra={"pe_order": order})
    write_manifest(out, "collect", args, {"system": args.system or "random"}, files,
                   {"n": n, "m": m, "N": N, "T": T, "dt": dt, "quadrature": d.mode})
    print(f"collected N={N} intervals for n={n}, m={m}; bundle in {files['bundle']}")
    return EXIT_OK


def cmd_learn(args, config: dict) -> int:
    out = args.out_dir
    d = read_bundle(args.bundle)
    Q, R = _weights(args, d.n, d.m)
    K0 = _read_matrix_arg(args.K0, "K0") if args.K0 else None
    eps = _opt(args, config, "eps", 1e-10)
    max_iters = _opt(args, config, "max_iters", 50, int)
    solver = _opt(args, config, "solver", "structured", str)
    if solver not in SOLVERS:
        raise ConfigurationError(f"solver must be one of {SOLVERS}")
    policy = algorithm2(d, Q, R, K0=K0, eps=eps, max_iters=max_iters, solver=solver)

    out.mkdir(parents=True, exist_ok=True)
    files = {"K": out / "K.txt", "P": out / "P.txt", "trace": out / "trace.csv"}
    linalg.write_matrix(files["K"], policy.K)
    linalg.write_matrix(files["P"], policy.P)
    write_trace_csv(files["trace"], policy.trace)
    write_manifest(out, "learn", args, {"bundle": args.bundle, "K0": args.K0 or "zero"}, files,
                   {"iterations": len(policy.trace), "converged": policy.trace.converged,
                    "cond_Zeta": policy.selection.condition, "solver": solver})
    status = "converged" if policy.trace.converged else "stopped"
    print(f"{status} after {len(policy.trace)} iterations; gap {policy.trace.final_gap:.3e}")
    print("K =")
    print(linalg.format_matrix(policy.K), end="")
    return EXIT_OK if policy.trace.converged else ConvergenceError.exit_code


def cmd_init_gain(args, config: dict) -> int:
    out = args.out_dir
    d = read_bundle(args.bundle)
    poles = _parse_poles(args.poles or config.get("poles", "lqr"))
    result = data_stabilizing_gain(d, poles)
    out.mkdir(parents=True, exist_ok=True)
    files = {"K0": out / "K0.txt", "spectrum": out / "spectrum.txt"}
    linalg.write_matrix(files["K0"], result.K0)
    with open(files["spectrum"], "w") as fh:
        fh.write("# eigenvalues of Xtilde (F - G Kbar): real imag\n")
        for lam in result.spectrum.sorted():
            fh.write(f"{lam.real:.17g} {lam.imag:.17g}\n")
    write_manifest(out, "init-gain", args, {"bundle": args.bundle}, files,
                   {"poles": "lqr" if poles == "lqr" else [str(p) for p in poles],
                    "max_real": result.spectrum.max_real, "cond_X": result.condition})
    print(f"K0 written to {files['K0']}; data closed-loop max Re = "
          f"{result.spectrum.max_real:.6g}")
    return EXIT_OK


def cmd_bench(args, config: dict) -> int:
    out = args.out_dir
    try:
        cfg = BenchConfig.from_file(args.config) if args.config else BenchConfig()
    except ValueError as exc:
        raise ConfigurationError(str(exc)) from exc
    if args.seed is not None:
        cfg.seed = args.seed
    if args.smoke:
        cfg.trials = SMOKE_TRIALS
    if args.trials is not None:
        cfg.trials = args.trials
    if args.dims:
        cfg.dims = args.dims
    if cfg.trials < 1 or not cfg.dims or min(cfg.dims) < 1:
        raise ConfigurationError("bench needs at least one trial and positive dimensions")
    report = run_benchmark(cfg, jobs=args.jobs)
    out.mkdir(parents=True, exist_ok=True)
    files = {"rows": out / "bench.csv", "table": out / "bench_table.txt"}
    report.write_csv(files["rows"])
    table = report.render_table()
    files["table"].write_text(table)
    write_manifest(out, "bench", args, {"config": args.config or "defaults"}, files,
                   {"bench_config": {k: v for k, v in vars(cfg).items()}})
    print(table, end="")
    return EXIT_OK


def cmd_verify(args, config: dict) -> int:
    """Check a bundle: rank, column selection, excitation, optional model audit."""
    d = read_bundle(args.bundle)
    checks = []
    ok_rank = verify_rank(d)
    checks.append(("rank [X; U] = n + m", ok_rank, f"rank {linalg.rank(d.Z)} of {d.n + d.m}"))
    if ok_rank:
        sel = select_columns(d)
        checks.append(("Z_eta nonsingular", True,
                       f"eta={list(sel.eta)}, cond(Z_eta)={sel.condition:.3e}"))
    mu_path = Path(args.bundle).parent / "mu.txt"
    if args.sequence or mu_path.exists():
        mu = read_sequence(args.sequence or mu_path)
        order = d.n + 1
        checks.append((f"input PE of order {order}", is_pe(mu, order), f"N={len(mu)}"))
    if args.system:
        plant = _read_system(args.system)
        res = model_residual(d, plant.A, plant.B)
        tol = 1e-8 if d.mode == "exact" else 1e-3
        checks.append(("Xtilde = A X + B U", res <= tol, f"relative residual {res:.3e}"))
    width = max(len(c[0]) for c in checks)
    for name, ok, detail in checks:
        print(f"{'PASS' if ok else 'FAIL'}  {name:<{width}}  {detail}")
    if args.out_dir:
        args.out_dir.mkdir(parents=True, exist_ok=True)
        write_manifest(args.out_dir, "verify", args, {"bundle": args.bundle}, {},
                       {"checks": [{"name": c[0], "ok": bool(c[1]), "detail": c[2]}
                                   for c in checks]})
    if not ok_rank:
        return DataError.exit_code
    return EXIT_OK if all(c[1] for c in checks) else DataError.exit_code


# -- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ctlqr", description=__doc__.split("\n\n")[0])
    p.add_argument("--seed", type=int, default=None, help="random seed (default 0)")
    p.add_argument("--config", type=Path, default=None, help="key = value config file")
    p.add_argument("--out-dir", type=Path, default=Path("."), help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("collect", help="simulate a PCPE experiment and build a data bundle")
    src = c.add_mutually_exclusive_group()
    src.add_argument("--system", type=Path, help="file holding A then B")
    src.add_argument("--random", type=int, nargs=2, metavar=("N", "M"),
                     help="draw a random stable controllable plant")
    c.add_argument("--T", type=float, help="hold interval (default 0.2)")
    c.add_argument("--dt", type=float, help="integration step (default 1e-4)")
    c.add_argument("--samples", type=int, help="number of intervals N (default (n+1)m+n)")
    c.add_argument("--order", type=int, help="PE order of the input (default n+1)")
    c.add_argument("--quadrature", choices=["auto", "exact", "trapezoid"])
    c.set_defaults(func=cmd_collect)

    def weights(sp):
        sp.add_argument("--Q", type=Path, help="state weight file (default q-scale * I)")
        sp.add_argument("--R", type=Path, help="input weight file (default r-scale * I)")
        sp.add_argument("--q-scale", type=float, default=1.0)
        sp.add_argument("--r-scale", type=float, default=1.0)

    ln = sub.add_parser("learn", help="run data-based policy iteration on a bundle")
    ln.add_argument("--bundle", type=Path, required=True)
    ln.add_argument("--K0", type=Path, help="initial stabilizing gain file (default zero)")
    weights(ln)
    ln.add_argument("--eps", type=float)
    ln.add_argument("--max-iters", type=int)
    ln.add_argument("--solver", choices=SOLVERS)
    ln.set_defaults(func=cmd_learn)

    ig = sub.add_parser("init-gain", help="stabilizing K0 from data only")
    ig.add_argument("--bundle", type=Path, required=True)
    ig.add_argument("--poles", help="'lqr' (default) or comma separated, e.g. -1,-2+1j,-2-1j")
    ig.set_defaults(func=cmd_init_gain)

    b = sub.add_parser("bench", help="SYL vs KRO timing sweep")
    b.add_argument("--smoke", action="store_true", help=f"{SMOKE_TRIALS} trials per dimension")
    b.add_argument("--trials", type=int)
    b.add_argument("--dims", type=int, nargs="+")
    b.add_argument("--jobs", type=int, default=1,
                   help="worker processes (timings are only comparable with 1)")
    b.set_defaults(func=cmd_bench)

    vf = sub.add_parser("verify", help="check the invariants of a data bundle")
    vf.add_argument("--bundle", type=Path, required=True)
    vf.add_argument("--system", type=Path, help="model for the data-equation audit")
    vf.add_argument("--sequence", type=Path, help="input sequence file (default ../mu.txt)")
    vf.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args.argv = argv
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        config = read_config(args.config) if args.command != "bench" else {}
        if args.seed is None and args.command != "bench":
            args.seed = int(config.get("seed", 0))
        return args.func(args, config)
    except CtlqrError as exc:
        print(f"ctlqr {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, OSError) as exc:
        print(f"ctlqr {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
