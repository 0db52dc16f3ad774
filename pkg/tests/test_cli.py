import json

import numpy as np
import pytest

from ctlqr import linalg
from ctlqr.cli import main
from ctlqr.matrix_equations import solve_are
from ctlqr.simulator import LtiSystem
from helpers import random_plant


def write_system(path, plant):
    with open(path, "w") as fh:
        linalg.dump_matrices(fh, plant.A, plant.B)


@pytest.fixture
def run_dir(tmp_path):
    assert main(["--seed", "3", "--out-dir", str(tmp_path), "collect", "--random", "2", "1"]) == 0
    return tmp_path


def test_collect_outputs(run_dir):
    d = run_dir / "bundle"
    X = linalg.read_matrix(d / "X.txt")
    assert X.shape == (2, 5)
    meta = json.loads((d / "meta.json").read_text())
    assert meta["N"] == 5 and meta["seed"] == 3
    manifest = json.loads((run_dir / "collect.manifest.json").read_text())
    assert manifest["command"] == "collect" and manifest["seed"] == 3
    for name in ("system.txt", "mu.txt", "trajectory.csv"):
        assert (run_dir / name).exists()


def test_collect_is_reproducible(tmp_path):
    for sub in ("a", "b"):
        assert main(["--seed", "9", "--out-dir", str(tmp_path / sub), "collect",
                     "--random", "3", "1", "--dt", "1e-3"]) == 0
    for name in ("X.txt", "U.txt", "Xtilde.txt", "meta.json"):
        assert (tmp_path / "a" / "bundle" / name).read_bytes() == \
               (tmp_path / "b" / "bundle" / name).read_bytes()


def test_collect_usage_errors(tmp_path, capsys):
    assert main(["--out-dir", str(tmp_path), "collect", "--system", str(tmp_path / "none.txt")]) == 2
    assert main(["--out-dir", str(tmp_path), "collect"]) == 2
    assert main(["collect", "--bogus"]) == 2
    assert main([]) == 2


def test_learn_on_stable_plant(run_dir):
    assert main(["--out-dir", str(run_dir), "learn", "--bundle", str(run_dir / "bundle"),
                 "--r-scale", "2"]) == 0
    K = linalg.read_matrix(run_dir / "K.txt")
    A, B = linalg.parse_matrices((run_dir / "system.txt").read_text())
    _, Kstar = solve_are(LtiSystem(A, B), np.eye(2), 2 * np.eye(1))
    assert np.linalg.norm(K - Kstar) <= 1e-3 * np.linalg.norm(Kstar)
    assert (run_dir / "trace.csv").exists() and (run_dir / "learn.manifest.json").exists()


def test_pipeline_on_unstable_plant(tmp_path):
    plant = random_plant(3, 1, seed=5, unstable=True)
    write_system(tmp_path / "plant.txt", plant)
    out = str(tmp_path / "run")
    assert main(["--out-dir", out, "collect", "--system", str(tmp_path / "plant.txt"),
                 "--quadrature", "exact", "--dt", "0.01"]) == 0
    bundle = str(tmp_path / "run" / "bundle")
    assert main(["--out-dir", out, "init-gain", "--bundle", bundle]) == 0
    assert main(["--out-dir", out, "learn", "--bundle", bundle,
                 "--K0", str(tmp_path / "run" / "K0.txt")]) == 0
    K = linalg.read_matrix(tmp_path / "run" / "K.txt")
    _, Kstar = solve_are(plant, np.eye(3), np.eye(1))
    assert np.linalg.norm(K - Kstar) <= 1e-6 * np.linalg.norm(Kstar)
    assert main(["--out-dir", out, "verify", "--bundle", bundle,
                 "--system", str(tmp_path / "plant.txt")]) == 0


def test_init_gain_with_poles(run_dir):
    assert main(["--out-dir", str(run_dir), "init-gain", "--bundle", str(run_dir / "bundle"),
                 "--poles=-1+1j,-1-1j"]) == 0
    spectrum = np.loadtxt(run_dir / "spectrum.txt")
    np.testing.assert_allclose(np.sort(spectrum[:, 1]), [-1, 1], atol=1e-6)
    assert main(["--out-dir", str(run_dir), "init-gain", "--bundle", str(run_dir / "bundle"),
                 "--poles=1,-1"]) == 2


def test_corrupted_bundle(run_dir):
    (run_dir / "bundle" / "X.txt").write_text("2 5\n1 2 3\n")
    assert main(["learn", "--bundle", str(run_dir / "bundle")]) == 3
    assert main(["learn", "--bundle", str(run_dir / "missing")]) == 3


def test_destabilizing_K0_gives_stability_exit(run_dir):
    K0 = run_dir / "bad.txt"
    linalg.write_matrix(K0, [[-50.0, -50.0]])
    assert main(["--out-dir", str(run_dir), "learn", "--bundle", str(run_dir / "bundle"),
                 "--K0", str(K0)]) == 5


def test_learn_not_converged_exit(run_dir):
    assert main(["--out-dir", str(run_dir), "learn", "--bundle", str(run_dir / "bundle"),
                 "--max-iters", "1", "--eps", "1e-14"]) == 4


def test_config_defaults(run_dir):
    cfg = run_dir / "learn.cfg"
    cfg.write_text("max_iters = 1\neps = 1e-14\n")
    assert main(["--config", str(cfg), "--out-dir", str(run_dir), "learn",
                 "--bundle", str(run_dir / "bundle")]) == 4
    cfg.write_text("max_iters = many\n")
    assert main(["--config", str(cfg), "--out-dir", str(run_dir), "learn",
                 "--bundle", str(run_dir / "bundle")]) == 2


def test_verify_flags_wrong_model(run_dir, capsys):
    assert main(["--out-dir", str(run_dir), "verify", "--bundle", str(run_dir / "bundle")]) == 0
    wrong = run_dir / "wrong.txt"
    write_system(wrong, LtiSystem(-np.eye(2), [[1.0], [0.0]]))
    assert main(["--out-dir", str(run_dir), "verify", "--bundle", str(run_dir / "bundle"),
                 "--system", str(wrong)]) == 3
    assert "FAIL" in capsys.readouterr().out


def test_bench_smoke_subset(tmp_path):
    cfg = tmp_path / "bench.cfg"
    cfg.write_text("repeats = 1\n")
    assert main(["--config", str(cfg), "--seed", "1", "--out-dir", str(tmp_path), "bench",
                 "--trials", "2", "--dims", "2", "3"]) == 0
    table = (tmp_path / "bench_table.txt").read_text()
    assert "KRO/SYL" in table
    assert json.loads((tmp_path / "bench.manifest.json").read_text())["bench_config"]["trials"] == 2


def test_version(capsys):
    assert main(["--version"]) == 0
    assert "ctlqr" in capsys.readouterr().out
