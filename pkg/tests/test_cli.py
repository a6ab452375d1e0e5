import csv
import io
import json

import numpy as np
import pytest

from neumannsys.cli import SWEEP_COLUMNS, main, read_state, write_state
from neumannsys.config import ConfigError, parse_config, resolve_values
from neumannsys.discretization import StatePair
from neumannsys.domain import build_uniform_grid

BASE = """
[domain]
dim = 2
lengths = 1, 1
counts = 9, 9
[solver]
n_starts = 4
"""


def _run(tmp_path, command, extra="", *flags):
    cfg = tmp_path / "run.ini"
    cfg.write_text(BASE + extra)
    out = tmp_path / "out"
    return main([command, "--config", str(cfg), "--out", str(out), "--quiet", *flags]), out


def test_parse_defaults_and_overrides():
    cfg = parse_config(BASE + "[coefficients]\nb = 1 + x\n[thresholds]\nn_radii = 50\n")
    assert cfg.counts == (9, 9) and cfg.b == "1 + x"
    assert cfg.search.n_radii == 50
    assert cfg.solve.n_starts == 4 and cfg.solve.rng_seed == 0


@pytest.mark.parametrize("text, where", [
    ("[domain]\ndim = 3\n", "[domain] dim"),
    ("[domain]\ncounts = 9\n", "[domain] counts"),
    ("[coefficients]\na = 1 + z\n", "[coefficients] a"),
    ("[solver]\nlambdas = linspace(1, 2)\n", "[solver] lambdas"),
    ("[solver]\nmax_iters = lots\n", "[solver] max_iters"),
    ("[solver]\nbogus = 1\n", "[solver] bogus"),
    ("[nowhere]\nx = 1\n", "[nowhere]"),
    ("[domain\n", "line: 1"),
])
def test_config_errors_are_addressed(text, where):
    with pytest.raises(ConfigError) as err:
        parse_config(text)
    assert where in str(err.value)


def test_resolve_values():
    vals = resolve_values("0.5/S_F, linspace(1, 2, 3), 2/s_F", s_F=0.5, S_F=1.0)
    assert vals == [0.5, 1.0, 1.5, 2.0, 4.0]
    assert resolve_values("", s_F=1.0, S_F=1.0) == []


def test_state_file_roundtrip(tmp_path, rng):
    g = build_uniform_grid(2, (1.0, 2.0), (4, 3))
    st = StatePair(rng.normal(size=12), rng.normal(size=12))
    write_state(tmp_path / "s.txt", g, st)
    dim, counts, lengths, back = read_state(tmp_path / "s.txt")
    assert (dim, counts, lengths) == (2, (4, 3), (1.0, 2.0))
    np.testing.assert_array_equal(back.u, st.u)
    np.testing.assert_array_equal(back.v, st.v)
    header = (tmp_path / "s.txt").read_text().splitlines()
    assert "# columns x y u v" in header and len(header) == 5 + 12


def test_thresholds_command(tmp_path):
    code, out = _run(tmp_path, "thresholds")
    assert code == 0
    rep = json.loads((out / "thresholds.json").read_text())
    assert rep["s_F"] == pytest.approx(0.8046, abs=2e-3)
    assert rep["S_F"] == pytest.approx(1.0, abs=1e-6)
    assert rep["inv_S_F"] <= rep["inv_s_F"]


def test_thresholds_c_doubled(tmp_path):
    code, out = _run(tmp_path, "thresholds", "[coefficients]\nc = 2\n")
    assert code == 0
    rep = json.loads((out / "thresholds.json").read_text())
    assert rep["s_F"] == pytest.approx(2 * 0.8047423425, rel=1e-8)


def test_nonpositive_coefficient_exit_2(tmp_path, capsys):
    code, _ = _run(tmp_path, "thresholds", "[coefficients]\na = x - 0.5\n")
    assert code == 2
    assert "Pi_+" in capsys.readouterr().err


def test_search_failure_exit_3(tmp_path):
    code, _ = _run(tmp_path, "thresholds", "[nonlinearity]\nF = s^2 + t^2\n")
    assert code == 3


@pytest.mark.parametrize("F, code", [("log-coupled", 0), ("s^2+t^2", 4), ("0", 4)])
def test_check_hypotheses(tmp_path, F, code):
    rc, out = _run(tmp_path, "check-hypotheses", f"[nonlinearity]\nF = {F}\n")
    assert rc == code
    rep = json.loads((out / "hypotheses.json").read_text())
    assert rep["verdict"] == ("pass" if code == 0 else "fail")
    if F == "0":
        assert rep["nonzero_found"] is False


def test_solve_below_threshold(tmp_path):
    code, out = _run(tmp_path, "solve", "lambda = 0.5/S_F\n")
    assert code == 0
    man = json.loads((out / "solutions.json").read_text())
    assert [r["classification"] for r in man["solutions"]] == ["trivial"]
    assert man["certificate"]["verdict"] == "nonexistence-certified"
    code, _ = _run(tmp_path, "verify", "lambda = 0.5/S_F\n")
    assert code == 0


def test_solve_lambda_zero(tmp_path):
    code, out = _run(tmp_path, "solve", "lambda = 0\n")
    assert code == 0
    man = json.loads((out / "solutions.json").read_text())
    assert [r["classification"] for r in man["solutions"]] == ["trivial"]


def test_solve_above_threshold_and_verify(tmp_path):
    code, out = _run(tmp_path, "solve", "lambda = 2/s_F\n")
    assert code == 0
    man = json.loads((out / "solutions.json").read_text())
    nontrivial = [r for r in man["solutions"] if r["classification"] != "trivial"]
    assert len(nontrivial) >= 2
    for r in nontrivial:
        assert r["certificate"]["verdict"] == "no-contradiction"
        assert (out / r["state_file"]).exists()
    assert _run(tmp_path, "verify", "lambda = 2/s_F\n")[0] == 0
    # corrupt one state: verification must fail
    path = out / nontrivial[0]["state_file"]
    lines = path.read_text().splitlines()
    parts = lines[10].split()
    parts[-1] = repr(float(parts[-1]) + 0.1)
    lines[10] = " ".join(parts)
    path.write_text("\n".join(lines) + "\n")
    assert _run(tmp_path, "verify", "lambda = 2/s_F\n")[0] == 5


def test_sweep_csv(tmp_path, capsys):
    extra = "lambdas = 0.5/S_F, 2/s_F, 0.5/S_F\n"
    code, out = _run(tmp_path, "sweep", extra)
    assert code == 0
    assert "repeated" in capsys.readouterr().err
    raw = (out / "sweep.csv").read_bytes()
    rows = list(csv.reader(io.StringIO(raw.decode())))
    assert tuple(rows[0]) == SWEEP_COLUMNS
    assert len(rows) == 3
    lams = [float(r[0]) for r in rows[1:]]
    assert lams == sorted(lams)
    assert rows[1][3] == "0" and int(rows[2][3]) >= 2
    assert all(r[-1] == "ok" for r in rows[1:])
    code, _ = _run(tmp_path, "sweep", extra)
    assert (out / "sweep.csv").read_bytes() == raw


def test_sweep_empty_lambda_list(tmp_path):
    assert _run(tmp_path, "sweep", "lambdas =\n")[0] == 2


def test_perturb_mu_zero_matches_solve(tmp_path):
    extra = "lambda = 2/s_F\n[perturbation]\nmus = 0\n"
    code, out = _run(tmp_path, "perturb", extra)
    assert code == 0
    rep = json.loads((out / "perturb.json").read_text())
    code, _ = _run(tmp_path, "solve", extra)
    man = json.loads((out / "solutions.json").read_text())
    assert [s["energy"] for s in rep["rows"][0]["solutions"]] == [s["energy"] for s in man["solutions"]]


@pytest.mark.parametrize("extra", [
    "lambda = 2/s_F\n[perturbation]\nmus = 0, 1/0\n",
    "lambda = 2/s_F\n[perturbation]\nG = s^6 + t^6\n",
    "lambda = 2/s_F\n[perturbation]\nmus = 0, nan\n",
])
def test_perturb_config_errors(tmp_path, extra):
    assert _run(tmp_path, "perturb", extra)[0] == 2


def test_seed_flag(tmp_path):
    code, out = _run(tmp_path, "solve", "lambda = 0.5/S_F\n", "--seed", "99")
    assert code == 0
    assert json.loads((out / "solutions.json").read_text())["rng_seed"] == 99
