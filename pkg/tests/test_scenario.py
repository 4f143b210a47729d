import csv
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings as hsettings, strategies as st

from doubleris.errors import ConfigError
from doubleris.io import read_matrix, write_matrix, write_trial_rates
from doubleris.scenario import (CSV_HEADER, Scenario, SweepSpec, dbm_to_watts, echo, parse_scenario,
                                parse_scenario_text, read_records, records_to_csv, run_benchmarks,
                                run_sweep, run_validate, scenario_hash, watts_to_dbm)

FAST_PROFILE = """
[system]
M = 4
N = 2
L = 4
[power]
snr_db = 0, 10
[run]
trials = 60
"""


def test_empty_file_gives_reference_deployment():
    s = parse_scenario_text("")
    assert (s.dims.M, s.dims.N, s.dims.L1, s.dims.L2) == (8, 4, 100, 100)
    assert s.noise_dbm == -94.0
    assert s.geometry.bs == (1.0, 0.0, 5.0) and s.geometry.user == (1.0, 50.0, 1.5)
    assert s.geometry.ris1 == (0.0, 50.0, 3.0) and s.geometry.ris2 == (0.0, 0.0, 3.0)
    assert s.geometry.grid(1, 100) == (10, 10)


def test_file_round_trip(tmp_path):
    p = tmp_path / "s.cfg"
    p.write_text("[system]\nM = 6\n[power]\nsnr_db = 1, 2\n")
    s = parse_scenario(p)
    assert s.dims.M == 6 and s.snr_db == (1.0, 2.0)
    again = parse_scenario_text(echo(s))
    assert scenario_hash(again) == scenario_hash(s)
    assert echo(again) == echo(s)


@given(M=st.integers(1, 16), L=st.sampled_from([1, 4, 9, 16]), snr=st.floats(-30, 40),
       noise=st.floats(-130, -50), spread=st.floats(0.1, 90), common=st.booleans())
@hsettings(max_examples=30, deadline=None)
def test_echo_is_idempotent(M, L, snr, noise, spread, common):
    text = (f"[system]\nM = {M}\nL = {L}\n[power]\nsnr_db = {snr!r}\nnoise_dbm = {noise!r}\n"
            f"[correlation]\nspread_t = {spread!r}\n[optimizer]\ncommon_phase = {str(common).lower()}\n")
    s = parse_scenario_text(text)
    assert scenario_hash(parse_scenario_text(echo(s))) == scenario_hash(s)


@pytest.mark.parametrize("text, field, line", [
    ("[system]\nM = 0\n", "M", 2),
    ("[system]\n\nL = 3.5\n", "L", 3),
    ("[system]\nQ = 3\n", "Q", 2),
    ("M = 3\n", "M", 1),
    ("[solver]\ndamping = 0\n", "damping", 2),
    ("[power]\nsnr_reference = rx\n", "snr_reference", 2),
    ("[correlation]\nidentity = maybe\n", "identity", 2),
    ("[geometry]\nris1_grid = 3x3\n", "ris1_grid", None),
    ("[system]\nM = 2\nM = 3\n", "M", 3),
])
def test_parse_errors_name_field_and_line(text, field, line):
    with pytest.raises(ConfigError) as info:
        parse_scenario_text(text)
    assert info.value.field == field
    if line is not None:
        assert info.value.line == line
        assert str(info.value).startswith(f"line {line}: ")


def test_unknown_section():
    with pytest.raises(ConfigError, match="unknown section"):
        parse_scenario_text("[sytem]\nM = 2\n")


@given(st.floats(-200, 100))
def test_dbm_round_trip(x):
    w = dbm_to_watts(x)
    assert float(watts_to_dbm(w)) == pytest.approx(x, rel=1e-12, abs=1e-12)
    assert float(dbm_to_watts(watts_to_dbm(w))) == pytest.approx(float(w), rel=1e-12)


def test_reference_snr_definition():
    s = parse_scenario_text("")
    g = s.profile.gamma
    P_w = dbm_to_watts(s.power_dbm(20.0))
    assert P_w * g["1"] * g["3"] / dbm_to_watts(s.noise_dbm) == pytest.approx(100.0, rel=1e-10)
    t = replace(s, snr_reference="transmit")
    assert t.power_dbm(20.0) == pytest.approx(20.0 - 94.0)


def test_desk_scale_respects_explicit_size():
    assert parse_scenario_text("").at_desk_scale().dims.L1 == 16
    assert parse_scenario_text("[system]\nL = 36\n").at_desk_scale().dims.L1 == 36


# ---- validate

def test_dead_channel_validates_trivially():
    text = FAST_PROFILE + "[correlation]\n" + "".join(f"gamma_{j}_db = -inf\n" for j in "12s34")
    rep = run_validate(parse_scenario_text(text), trials=10)
    assert rep.passed
    assert all(r.asymptotic == 0 and r.monte_carlo == 0 for r in rep.rows)


def test_validate_report_csv(tmp_path):
    rep = run_validate(parse_scenario_text(FAST_PROFILE), threshold=1.0)
    assert len(rep.rows) == 2 and rep.passed
    rep.to_csv(tmp_path / "v.csv")
    rows = list(csv.DictReader(open(tmp_path / "v.csv")))
    assert len(rows) == 2 and float(rows[0]["snr_db"]) == 0.0


# ---- sweep

def test_sweep_spec_validation():
    with pytest.raises(ConfigError):
        SweepSpec("snr", ())
    with pytest.raises(ConfigError):
        SweepSpec("snr", (1, 1))
    with pytest.raises(ConfigError):
        SweepSpec("length", (1,))
    with pytest.raises(ConfigError):
        SweepSpec("element_count", (2.5,))
    with pytest.raises(ConfigError):
        SweepSpec("snr", (1,), methods=("guess",))
    SweepSpec("element_spacing", (0.5, 0.25, 0.125))


def test_single_point_sweep(tmp_path):
    s = parse_scenario_text(FAST_PROFILE)
    out = tmp_path / "one.csv"
    recs = run_sweep(s, SweepSpec("snr", (5.0,)), output=out)
    lines = out.read_text().splitlines()
    assert lines[0] == ",".join(CSV_HEADER) and len(lines) == 2
    assert len(recs) == 1 and recs[0].rate_bits == pytest.approx(recs[0].rate_nats / math.log(2), rel=1e-12)


def test_sweep_is_deterministic_and_round_trips(tmp_path):
    s = parse_scenario_text(FAST_PROFILE)
    spec = SweepSpec("snr", (0.0, 5.0, 10.0), ("asymptotic", "montecarlo"))
    a = records_to_csv(run_sweep(s, spec, threads=1))
    b = records_to_csv(run_sweep(s, spec, threads=3))
    assert a == b
    (tmp_path / "x.csv").write_text(a)
    back = read_records(tmp_path / "x.csv")
    assert [r.value for r in back] == [0.0, 0.0, 5.0, 5.0, 10.0, 10.0]
    assert back[1].method == "montecarlo" and back[1].stderr > 0
    assert records_to_csv(back) == a


def test_sweep_records_failures_in_row():
    s = parse_scenario_text(FAST_PROFILE + "[solver]\nmax_iterations = 1\n")
    recs = run_sweep(s, SweepSpec("snr", (0.0, 10.0)))
    assert all(r.status.startswith("error:") for r in recs)


def test_sweep_axes_change_the_scenario():
    s = parse_scenario_text(FAST_PROFILE)
    r = run_sweep(s, SweepSpec("antenna_count", (2, 4)))
    assert r[0].rate_nats != r[1].rate_nats
    r = run_sweep(s, SweepSpec("element_count", (1, 4)))
    assert r[0].rate_nats < r[1].rate_nats


# ---- benchmarks

def test_benchmarks_identity_ordering():
    s = parse_scenario_text(FAST_PROFILE + "[correlation]\nidentity = true\n")
    t = run_benchmarks(s, 10.0)
    a, b, c, d, e = (t.rate(k) for k in "abcde")
    assert a >= b >= max(c, d) and a >= e


def test_benchmarks_dead_double_reflection():
    s = parse_scenario_text(FAST_PROFILE + "[correlation]\ngamma_s_db = -inf\n")
    t = run_benchmarks(s, 10.0)
    assert abs(t.rate("a") - t.rate("b")) < 1e-8


def test_benchmark_csv(tmp_path):
    t = run_benchmarks(parse_scenario_text(FAST_PROFILE), 0.0)
    t.to_csv(tmp_path / "b.csv")
    rows = list(csv.DictReader(open(tmp_path / "b.csv")))
    assert [r["key"] for r in rows] == list("abcde")


# ---- io

def test_matrix_dump_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    A = rng.standard_normal((3, 5)) + 1j * rng.standard_normal((3, 5))
    write_matrix(tmp_path / "a.txt", A, "T3")
    name, B = read_matrix(tmp_path / "a.txt")
    assert name == "T3" and np.array_equal(A, B)


def test_matrix_dump_rejects_garbage(tmp_path):
    (tmp_path / "g.txt").write_text("hello\n")
    with pytest.raises(ConfigError):
        read_matrix(tmp_path / "g.txt")


def test_trial_rates_csv(tmp_path):
    write_trial_rates(tmp_path / "t.csv", [0.5, 1.5], seed=4)
    rows = list(csv.DictReader(open(tmp_path / "t.csv")))
    assert [float(r["rate_nats"]) for r in rows] == [0.5, 1.5] and rows[0]["seed"] == "4"


def test_scenario_defaults_are_consistent():
    s = Scenario()
    assert s.dims.L1 == 100 and s.trials == 1000
    with pytest.raises(ConfigError):
        Scenario(trials=0)
