import csv

import pytest

from doubleris.cli import main
from doubleris.io import read_matrix
from doubleris.scenario import parse_scenario

CFG = """
[system]
M = 4
N = 2
L = 4
[power]
snr_db = 0, 10
[optimizer]
swarm_size = 6
pso_iterations = 5
[run]
trials = 40
"""


@pytest.fixture
def cfg(tmp_path):
    p = tmp_path / "s.cfg"
    p.write_text(CFG)
    return p


def test_echo_config(cfg, tmp_path, capsys):
    out = tmp_path / "echo.cfg"
    assert main(["echo-config", str(cfg), "-o", str(out)]) == 0
    assert parse_scenario(out).dims.M == 4
    assert "scenario hash" in capsys.readouterr().err


def test_echo_defaults(capsys):
    assert main(["echo-config"]) == 0
    assert "L1 = 100" in capsys.readouterr().out


def test_validate_exit_codes(cfg, tmp_path):
    out = tmp_path / "v.csv"
    assert main(["validate", str(cfg), "--threshold", "1.0", "-o", str(out)]) == 0
    assert len(list(csv.DictReader(open(out)))) == 2
    assert main(["validate", str(cfg), "--threshold", "0", "--trials", "5"]) == 1


def test_sweep_writes_csv(cfg, tmp_path):
    out = tmp_path / "s.csv"
    assert main(["sweep", str(cfg), "--axis", "element_count", "--values", "1,4", "-o", str(out)]) == 0
    assert len(open(out).read().splitlines()) == 3


def test_sweep_failures_give_nonzero_exit(tmp_path):
    p = tmp_path / "bad.cfg"
    p.write_text(CFG + "[solver]\nmax_iterations = 1\n")
    assert main(["sweep", str(p), "--values", "0"]) == 1


def test_optimize_outputs(cfg, tmp_path):
    out = tmp_path / "opt"
    assert main(["optimize", str(cfg), "-o", str(out), "--snr", "10"]) == 0
    assert (out / "trace.csv").read_text().startswith("iteration,rate_nats,rate_bits,wall_ms")
    name, Q = read_matrix(out / "Q.txt")
    assert name == "Q" and Q.shape == (4, 4)
    assert read_matrix(out / "theta1.txt")[1].shape == (1, 4)


def test_benchmark(cfg, tmp_path, capsys):
    code = main(["benchmark", str(cfg), "--snr", "10", "-o", str(tmp_path / "b.csv")])
    text = capsys.readouterr().out
    assert "(e) double reflection only" in text
    assert code in (0, 1) and ("ordering: ok" in text) == (code == 0)


def test_config_error_exit_code(tmp_path, capsys):
    p = tmp_path / "bad.cfg"
    p.write_text("[system]\nM = 0\n")
    assert main(["validate", str(p)]) == 2
    assert "line 2: M:" in capsys.readouterr().err
