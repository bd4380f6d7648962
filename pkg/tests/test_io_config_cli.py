import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fhj.cli import main, run_command
from fhj.config import SCHEMA, ConfigError, ExperimentConfig
from fhj.io import read_csv, write_csv

finite = st.floats(allow_nan=False, allow_infinity=False)


# -- csv -----------------------------------------------------------------------

@settings(max_examples=50, deadline=None)
@given(a=st.lists(finite, min_size=0, max_size=30), b=st.lists(finite, min_size=30, max_size=30),
       note=st.text(alphabet="abc =,.0123456789-", max_size=20))
def test_csv_round_trip_is_exact(a, b, note, tmp_path_factory):
    path = tmp_path_factory.mktemp("csv") / "x.csv"
    a = np.array(a)
    cols = {"x": a, "y": np.array(b[: a.size])}
    write_csv(path, cols, {"note": note.strip() or "none", "n": 3})
    meta, back = read_csv(path)
    assert list(back) == ["x", "y"]
    assert np.array_equal(back["x"], a) and np.array_equal(back["y"], cols["y"])
    assert meta["n"] == "3"


def test_csv_keeps_special_values(tmp_path):
    v = np.array([np.inf, -np.inf, 0.0, -0.0, 5e-324])
    write_csv(tmp_path / "s.csv", {"v": v})
    _, back = read_csv(tmp_path / "s.csv")
    assert np.array_equal(back["v"], v)
    assert np.signbit(back["v"][3])


def test_csv_rejects_ragged_columns(tmp_path):
    with pytest.raises(ValueError):
        write_csv(tmp_path / "r.csv", {"a": [1.0, 2.0], "b": [1.0]})
    assert not list(tmp_path.iterdir())


# -- config --------------------------------------------------------------------

def test_defaults_resolve():
    cfg = ExperimentConfig.parse("")
    assert cfg["s"] == 0.75 and cfg["grid.n"] == 2000 and cfg["t"] == (1.0,)
    assert set(cfg.metadata()) == {f"config.{k}" for k in SCHEMA}


def test_file_then_overrides():
    cfg = ExperimentConfig.parse("s = 0.6  # order\np = 1.05\nt = 0.5, 1, 2\n", ["p=1.08"])
    assert cfg["s"] == 0.6 and cfg["p"] == 1.08 and cfg["t"] == (0.5, 1.0, 2.0)


@pytest.mark.parametrize("text, overrides", [
    ("sigma = 0.7", ()),
    ("", ["grid.m=3"]),
    ("s = abc", ()),
    ("s = nan", ()),
    ("s = 0x10", ()),
    ("grid.n = 2.5", ()),
    ("kernel.kind = fancy", ()),
    ("t = 1,,2", ()),
    ("", ["novalue"]),
    ("[section]\ns = 0.7", ()),
])
def test_bad_entries_rejected(text, overrides):
    with pytest.raises(ConfigError):
        ExperimentConfig.parse(text, overrides)


def test_spec_maps_domain_errors():
    with pytest.raises(ConfigError):
        ExperimentConfig.parse("", ["grid.n=50", "grid.ratio=1.001"]).spec()
    with pytest.raises(ConfigError):
        ExperimentConfig.parse("", ["kernel.kind=constant", "kernel.gamma_hi=2"]).operator()


def test_builders():
    cfg = ExperimentConfig.parse("kernel.kind = sup_pair\nkernel.gamma_lo = 0.5\nkernel.gamma_hi = 2\n"
                                 "source.kind = constant\nsource.c = 3\nexterior.kind = constant\n"
                                 "exterior.c = 1\ngrid.n = 101\ngrid.ratio = 1.2\ngrid.d_min = 1e-4")
    spec = cfg.spec()
    assert spec.operator.bounds == (0.5, 2.0)
    assert spec.source.sup_norm(spec.domain) == 3.0
    assert not spec.exterior.is_zero
    assert spec.domain.nodes().size == 101


# -- cli -------------------------------------------------------------------------

SMALL = ["grid.n=200", "grid.ratio=1.15", "grid.d_min=1e-6"]


def run(cmd, tmp_path, *overrides):
    cfg = ExperimentConfig.parse("", list(overrides))
    return run_command(cmd, cfg, tmp_path)


def test_ctau(tmp_path):
    status, lines = run("ctau", tmp_path)
    assert status == 0
    meta, cols = read_csv(tmp_path / "ctau.csv")
    assert cols["tau"].size == 200
    zeros = [float(z) for z in meta["zeros"].split(",")]
    assert zeros == pytest.approx([-0.25, 0.75], abs=1e-7)
    assert meta["config.s"] == "0.75"
    assert "zeros of c" in lines[0]


def test_lambda0(tmp_path):
    status, lines = run("lambda0", tmp_path, *SMALL)
    assert status == 0
    meta, _ = read_csv(tmp_path / "lambda0.csv")
    assert float(meta["lambda0"]) == pytest.approx(4.0 / 3.0, rel=1e-10)


def test_solve_zero_data(tmp_path):
    status, _ = run("solve", tmp_path, *SMALL)
    assert status == 0
    _, cols = read_csv(tmp_path / "u.csv")
    assert np.all(cols["u"] == 0.0)


def test_solve_constant_source(tmp_path):
    status, _ = run("solve", tmp_path, *SMALL, "lambda=1", "source.kind=constant", "source.c=2")
    assert status == 0
    _, cols = read_csv(tmp_path / "u.csv")
    assert np.all((cols["u"] > 0.0) & (cols["u"] <= 2.0))
    assert np.max(np.abs(cols["residual"])) < 1e-8


def test_validate_failure_exits_two_and_leaves_nothing(tmp_path):
    out = tmp_path / "run"
    status, lines = run("validate", out, "lambda=-10")
    assert status == 2
    assert any("lambda" in l for l in lines)
    assert not out.exists()


def test_validate_success_writes_report(tmp_path):
    status, _ = run("validate", tmp_path, *SMALL)
    assert status == 0
    text = (tmp_path / "validate.txt").read_text()
    assert "PASS lambda" in text and "cases: family" in text


def test_case_mismatch_exits_two(tmp_path):
    status, _ = run("barrier", tmp_path / "b", *SMALL, "case=scale_pos")
    assert status == 2
    assert not (tmp_path / "b").exists()


def test_barrier_command(tmp_path):
    status, lines = run("barrier", tmp_path, *SMALL, "p=1.45")
    assert status == 0
    assert lines[0].startswith("case scale_neg")
    _, cols = read_csv(tmp_path / "scale_neg_super_check.csv")
    assert np.all(cols["passed"] == 1.0)


def test_numerical_failure_exits_three_and_cleans_up(tmp_path):
    # a shallow schedule leaves no nodes in the fit window, after level
    # checkpoints were already written
    out = tmp_path / "r"
    status, lines = run("rates", out, *SMALL, "perron.n_last=300")
    assert status == 3
    assert lines[0].startswith("numerical failure")
    assert not out.exists()


def test_rates_is_deterministic(tmp_path):
    args = (*SMALL, "p=1.45", "perron.n_last=1e5")
    assert run("rates", tmp_path / "a", *args)[0] == 0
    assert run("rates", tmp_path / "b", *args)[0] == 0
    for name in ["rates.csv"] + sorted(p.name for p in (tmp_path / "a" / "levels").iterdir()):
        sub = "" if name == "rates.csv" else "levels"
        assert (tmp_path / "a" / sub / name).read_bytes() == (tmp_path / "b" / sub / name).read_bytes()
    meta, _ = read_csv(tmp_path / "a" / "rates.csv")
    assert float(meta["exponent"]) == pytest.approx(-1.0 / 9.0, abs=0.02)


def test_main_parses_arguments(tmp_path, capsys):
    cfg = tmp_path / "c.ini"
    cfg.write_text("s = 0.75\ngrid.n = 200\n")
    assert main(["lambda0", "--config", str(cfg), "--out", str(tmp_path / "o"),
                 "--override", "grid.ratio=1.15", "grid.d_min=1e-6"]) == 0
    assert "lambda0 = 1.333" in capsys.readouterr().out
    assert main(["lambda0", "--override", "bogus=1"]) == 2
    assert main(["lambda0", "--config", str(tmp_path / "missing.ini")]) == 2


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "fhj.cli", "validate", "--out", str(tmp_path),
                        "--override", "lambda=-10"], capture_output=True, text=True)
    assert r.returncode == 2
    assert "FAIL lambda" in r.stderr
