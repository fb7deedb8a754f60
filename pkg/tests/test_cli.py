import json
import subprocess
import sys

import pytest

from avgwave.cli import (EXIT_CONFIG, EXIT_FAIL, EXIT_IO, EXIT_NUMERIC, EXIT_OK, ConfigError, main,
                         parse_config, validate)

BENCH = """
experiment = fk-vs-pde
dim = 1
atom = 1.0, 1.0
eps = 0.25
t = 0.25
xi = 0, 1, 2
n_paths = 2000
n_fields = 500
n_steps = 4096
L = 40
N = 2048
"""


def _write(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_parse_config():
    cfg = parse_config(BENCH + "atom = 2, 0.5  # second atom\n")
    assert cfg.atoms == [(1.0, 1.0), (2.0, 0.5)]
    assert cfg.xi == [[0.0], [1.0], [2.0]]
    assert cfg.N == 2048 and cfg.L == 40.0
    two = parse_config("dim = 2\nxi = 0, 0; 1, 0.5\neps = 0.1, 0.05\n")
    assert two.xi == [[0.0, 0.0], [1.0, 0.5]]
    assert two.eps == [0.1, 0.05]
    assert parse_config("dim = 2\nxi = 1, 2\n").xi == [[1.0, 2.0]]
    for bad in ("nonsense line", "colour = red", "atom = 1", "n_paths = many"):
        with pytest.raises(ConfigError):
            parse_config(bad)


def test_validate():
    assert validate(parse_config(BENCH)) == []
    coarse = validate(parse_config(BENCH.replace("N = 2048", "N = 256")))
    assert any("sample_potential" in v and "eps/(4 max lambda)" in v for v in coarse)
    assert any("n_steps" in v for v in validate(parse_config(BENCH + "n_steps = 0\n")))
    assert any("power of two" in v for v in validate(parse_config(BENCH + "N = 1000\n")))
    assert any("box too small" in v for v in validate(parse_config(BENCH + "L = 4\nN = 256\n")))
    assert any("unknown experiment" in v for v in validate(parse_config("experiment = plot\n")))
    assert any("lambda" in v for v in validate(parse_config(BENCH + "atom = -1, 1\n")))


def test_mean_xtau_row(tmp_path):
    cfg = _write(tmp_path, "experiment = mean-xtau\ndim = 1\ntau = 1e-8\nt = 1\nn_steps = 1\n")
    assert main(["--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_OK
    lines = (tmp_path / "o" / "mean-xtau.csv").read_text().splitlines()
    assert lines[0] == "dim,tau,t,route,mean_re,mean_im,stderr,n"
    closed = next(line for line in lines if ",closed-form," in line).split(",")
    assert abs(float(closed[4]) - 0.531923) <= 1e-3
    summary = json.loads((tmp_path / "o" / "mean-xtau.json").read_text())
    assert summary["passed"] and summary["inputs"]["tau"] == [1e-8]


def test_zero_measure_fk_vs_pde_passes(tmp_path):
    cfg = _write(tmp_path, "experiment = fk-vs-pde\ndim = 1\neps = 0.25\nt = 0.25\nxi = 0, 1\n"
                           "n_paths = 50\nn_fields = 5\nn_steps = 64\nL = 40\nN = 512\n")
    assert main(["--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_OK
    summary = json.loads((tmp_path / "o" / "fk-vs-pde.json").read_text())
    assert summary["verdicts"]["fk_pde_compatible"]
    at_zero, at_one = summary["comparisons"]
    assert at_zero["abs_diff"] < 1e-12
    assert at_one["abs_diff"] <= 3 * at_one["combined_stderr"]


def test_rerun_is_byte_identical(tmp_path):
    text = BENCH.replace("n_paths = 2000", "n_paths = 30").replace("n_fields = 500", "n_fields = 10") \
        .replace("n_steps = 4096", "n_steps = 128")
    cfg = _write(tmp_path, text)
    outs = []
    for k, workers in enumerate(("1", "2")):
        out = tmp_path / f"o{k}"
        assert main(["--config", cfg, "--seed", "42", "--workers", workers, "--out", str(out)]) in (EXIT_OK, EXIT_FAIL)
        outs.append((out / "fk-vs-pde.csv").read_bytes())
    assert outs[0] == outs[1]
    summary = json.loads((tmp_path / "o0" / "fk-vs-pde.json").read_text())
    assert summary["seeds"]["master"] == 42
    assert "fk|d=1|eps=0.25|t=0.25|n=128" in summary["seeds"]["ensembles"]
    assert summary["wall_clock_seconds"] > 0


def test_exit_codes(tmp_path):
    assert main(["--config", _write(tmp_path, "dim = 5\n"), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert main(["--config", _write(tmp_path, "bogus\n"), "--out", str(tmp_path)]) == EXIT_CONFIG
    assert main(["--config", str(tmp_path / "missing.cfg")]) == EXIT_IO
    blocker = tmp_path / "file"
    blocker.write_text("")
    ok = _write(tmp_path, "experiment = mean-xtau\ntau = 0.1\nn_steps = 1\n")
    assert main(["--config", ok, "--out", str(blocker / "sub")]) == EXIT_IO
    assert main(["--config", ok, "--validate-only"]) == EXIT_OK


def test_strict_variance_flag(tmp_path):
    text = ("experiment = duhamel-check\ndim = 1\natom = 1, 20\neps = 0.25\nt = 1\nxi = 0\n"
            "coupling = 1, 0.5\nn_paths = 200\nn_steps = 64\n")
    loose = main(["--config", _write(tmp_path, text), "--out", str(tmp_path / "a")])
    assert loose in (EXIT_OK, EXIT_FAIL)
    assert json.loads((tmp_path / "a" / "duhamel-check.json").read_text())["variance_flagged"]
    strict = main(["--config", _write(tmp_path, text + "strict = true\n"), "--out", str(tmp_path / "b")])
    assert strict == EXIT_NUMERIC


def test_module_entry_point(tmp_path):
    cfg = _write(tmp_path, "experiment = mean-xtau\ndim = 2\ntau = 1e-6\nt = 1\nn_steps = 1\n")
    proc = subprocess.run([sys.executable, "-m", "avgwave", "--config", cfg, "--out", str(tmp_path / "o")],
                          capture_output=True, text=True)
    assert proc.returncode == EXIT_OK, proc.stderr
