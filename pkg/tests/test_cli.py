import json

import numpy as np
import pytest

from wardropdyn.cli import main
from wardropdyn.scenario import read_csv

CYCLIC = """
name = "loop"

[network]
links = [
    { name = "a", tail = 0, head = 1, capacity = 2.0, theta = 1.0 },
    { name = "b", tail = 1, head = 2, capacity = 2.0, theta = 1.0 },
    { name = "c", tail = 2, head = 1, capacity = 2.0, theta = 1.0 },
    { name = "d", tail = 2, head = 3, capacity = 2.0, theta = 1.0 },
]

[dynamics]
eta = 0.1
best_response = { kind = "logit", beta = 1.0 }
local_decision = { kind = "i_logit", gamma = 1.0 }

[dynamics.initial_density]
a = 1.0
b = 1.0
c = 1.0
d = 1.0
"""


def test_simulate_fig1(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["simulate", "fig1", "--output", str(out), "--svg"]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["run"]["status"] == "converged"
    assert manifest["run"]["terminal_dist_l1"] <= 1e-4
    assert (out / "trajectory.svg").exists()
    assert "converged" in capsys.readouterr().out


@pytest.mark.slow
def test_simulate_large_eta_shrinks_step(tmp_path):
    out = tmp_path / "run"
    assert main(["simulate", "fig1", "--eta", "100", "--output", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["integrator"]["dt"] == pytest.approx(0.001)
    assert manifest["run"]["terminal_dist_l1"] <= 1e-4


def test_simulate_missing_file(tmp_path, capsys):
    assert main(["simulate", str(tmp_path / "missing.scenario")]) == 1
    assert "ParseError" in capsys.readouterr().err


def test_bad_option_value_is_rejected_before_running():
    with pytest.raises(SystemExit) as info:
        main(["simulate", "fig1", "--eta", "-1"])
    assert info.value.code == 2


def test_equilibrium_two_link_sym(tmp_path):
    assert main(["equilibrium", "two-link-sym", "--output", str(tmp_path)]) == 0
    rows = (tmp_path / "equilibrium.csv").read_text().splitlines()
    pis = [float(r.split(",")[-1]) for r in rows if r.startswith("path,")]
    np.testing.assert_allclose(pis, [0.5, 0.5], atol=1e-10)


def test_equilibrium_fig1_residual(tmp_path, capsys):
    assert main(["equilibrium", "fig1", "--method", "mirror_descent", "--output", str(tmp_path)]) == 0
    line = [l for l in capsys.readouterr().out.splitlines() if l.startswith("fixed-point residual")][0]
    assert float(line.split()[-1]) <= 1e-10


def test_equilibrium_infeasible(tmp_path, capsys):
    assert main(["equilibrium", "infeasible", "--output", str(tmp_path)]) == 1
    assert "C* = 0.9" in capsys.readouterr().err


def test_check(capsys):
    assert main(["check", "fig1"]) == 0
    out = capsys.readouterr().out
    assert "min-cut C*       6 " in out and "paths            10" in out
    assert main(["check", "infeasible"]) == 1
    assert "0.9" in capsys.readouterr().out


def test_check_cyclic_file(tmp_path, capsys):
    path = tmp_path / "loop.scenario"
    path.write_text(CYCLIC)
    assert main(["check", str(path)]) == 1
    assert "CycleDetected" in capsys.readouterr().err


def test_sweep_and_compare_small(tmp_path):
    out = tmp_path / "sweep"
    assert main(["sweep", "two-link-sym", "--etas", "0.1,10", "--output", str(out)]) == 0
    summary = (out / "summary.csv").read_text().splitlines()
    assert summary[0] == "eta,status,terminal_dist_l1,time_to_threshold,t_final"
    assert len(summary) == 3
    assert (out / "eta_0.1" / "trajectory.csv").exists()

    cmp_dir = tmp_path / "cmp"
    assert main(["compare", "two-link-sym", "--output", str(cmp_dir)]) == 0
    data = read_csv(cmp_dir / "comparison.csv")
    assert set(data) == {"t", "dist_l1_i_logit", "dist_l1_preference_consistent"}


def test_output_env_default(tmp_path, monkeypatch):
    monkeypatch.setenv("WARDROPDYN_OUTPUT", str(tmp_path))
    assert main(["equilibrium", "single-link"]) == 0
    assert (tmp_path / "equilibrium-single-link" / "equilibrium.csv").exists()


def test_repeat_runs_identical(tmp_path):
    for k in range(2):
        assert main(["simulate", "two-link-asym", "--t-end", "50", "--output", str(tmp_path / str(k))]) == 0
    for name in ("trajectory.csv", "manifest.json"):
        assert (tmp_path / "0" / name).read_bytes() == (tmp_path / "1" / name).read_bytes()
