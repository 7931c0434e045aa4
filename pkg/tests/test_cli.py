import shutil
import subprocess

import numpy as np
import pytest

from hdsa.cli import main
from hdsa.harness import read_csv
from hdsa.plotting import PANELS

CONFIG = """\
n = 60
zeta_grid = [0.25, 0.5]
eta_grid = [0.5, 2.0]
reps = 2
population_m = 300
"""


@pytest.fixture
def cfg_path(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text(CONFIG)
    return p


def test_rs_prints_residuals(cfg_path, capsys):
    assert main(["rs", "--config", str(cfg_path), "--seed", "7"]) == 0
    out = capsys.readouterr().out
    res = [float(line.split(":")[1]) for line in out.splitlines() if line.startswith("residual_")]
    assert len(res) == 5 and max(res) <= 1e-8
    assert "converged: True" in out


def test_rs_nonconvergence_exit_code(cfg_path, capsys):
    cfg_path.write_text(CONFIG + "rs_max_iter = 2\n")
    assert main(["rs", "--config", str(cfg_path)]) == 2
    assert "did not reach" in capsys.readouterr().err


def test_sweep_then_plot(cfg_path, tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["sweep", "--config", str(cfg_path), "--out", str(out), "--quiet"]) == 0
    assert capsys.readouterr().out == ""
    rows = read_csv(out / "sweep.csv")
    assert len(rows) == 4
    for stem, *_ in PANELS:
        assert (out / f"{stem}.svg").read_text().lstrip().startswith("<?xml")
    again = tmp_path / "again"
    assert main(["plot", str(out / "sweep.csv"), "--out", str(again), "--format", "png"]) == 0
    assert all((again / f"{stem}.png").stat().st_size > 0 for stem, *_ in PANELS)


def test_sweep_svg_is_reproducible(cfg_path, tmp_path):
    for name in ("a", "b"):
        assert main(["sweep", "--config", str(cfg_path), "--out", str(tmp_path / name), "--quiet"]) == 0
    for f in ["sweep.csv"] + [f"{stem}.svg" for stem, *_ in PANELS]:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_gen_then_fit(cfg_path, tmp_path, capsys):
    assert main(["gen", "--config", str(cfg_path), "--zeta", "0.5", "--out", str(tmp_path)]) == 0
    data = tmp_path / "dataset.csv"
    header = data.read_text().splitlines()[0].split(",")
    assert header[:3] == ["id", "time", "status"] and len(header) == 3 + 30
    capsys.readouterr()
    assert main(["fit", "--config", str(cfg_path), "--data", str(data), "--eta", "1.0"]) == 0
    from_file = capsys.readouterr().out
    assert main(["fit", "--config", str(cfg_path), "--zeta", "0.5", "--eta", "1.0"]) == 0
    simulated = capsys.readouterr().out
    line = lambda text, key: next(l for l in text.splitlines() if l.startswith(key))
    assert line(from_file, "objective") == line(simulated, "objective")
    assert float(line(simulated, "grad_norm").split(":")[1]) <= 1e-8


def test_missing_config(tmp_path, capsys):
    missing = tmp_path / "absent.toml"
    assert main(["rs", "--config", str(missing)]) == 1
    assert str(missing) in capsys.readouterr().err


@pytest.mark.parametrize(
    "argv",
    [["bogus"], ["rs", "--nope"], [], ["rs", "--zeta", "-1"], ["rs", "--seed", "x"]],
)
def test_usage_errors(argv, capsys):
    assert main(argv) == 1
    assert "hdsa" in capsys.readouterr().err


def test_unknown_subcommand_shows_help(capsys):
    assert main(["bogus"]) == 1
    err = capsys.readouterr().err
    assert "usage: hdsa" in err and "invalid choice" in err


def test_plot_missing_csv(tmp_path, capsys):
    assert main(["plot", str(tmp_path / "none.csv")]) == 1
    assert "none.csv" in capsys.readouterr().err


def test_infeasible_data_exit_code(tmp_path, capsys):
    p = tmp_path / "d.csv"
    p.write_text("id,time,status,x1\n1,0.5,1,0.1\n2,3.5,1,-0.2\n")
    assert main(["fit", "--data", str(p)]) == 2
    assert "T[1]" in capsys.readouterr().err


def test_help(capsys):
    assert main(["--help"]) == 0
    assert "sweep" in capsys.readouterr().out


@pytest.mark.skipif(shutil.which("hdsa") is None, reason="console script not installed")
def test_console_script(cfg_path):
    r = subprocess.run(["hdsa", "rs", "--config", str(cfg_path)], capture_output=True, text=True)
    assert r.returncode == 0 and "residual_rs1" in r.stdout
