"""Scenario files, sweeps, validation runs and deployment benchmarks.

A scenario file is flat ``key = value`` text grouped under ``[section]``
headers; ``#`` starts a comment.  An empty file gives the reference
deployment (M=8, N=4, 100-element surfaces, -94 dBm noise).  :func:`echo`
writes every key with its resolved value, and parsing that output gives the
same :func:`scenario_hash`.

SNR convention: ``snr_db`` is the transmit power over the noise power, scaled
by the path-loss gain of the BS -> RIS1 -> user cascade,
``snr = P * G(BS, RIS1) * G(RIS1, user) / noise``.  With ``snr_reference =
transmit`` it is plain ``P / noise``.  Gain overrides change the channel but
not the transmit power implied by an SNR value.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from functools import cached_property
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .channel import (LINKS, CorrelationParams, CorrelationProfile, Link, NodeGeometry, PhaseConfig,
                      SystemDims, build_profile, link_gains)
from .errors import ConfigError, DoubleRisError
from .fixed_point import VARIANTS, SolverSettings, asymptotic_rate
from .montecarlo import ergodic_rate_mc
from .optimize import PsoSettings, TransmitCovariance, alternating_optimize

LN2 = math.log(2)
DESK_L = 16


def dbm_to_watts(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def watts_to_dbm(w):
    return 10.0 * np.log10(np.asarray(w, dtype=float)) + 30.0


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class Scenario:
    dims: SystemDims = SystemDims(8, 4, 100, 100)
    geometry: NodeGeometry = NodeGeometry()
    correlation: CorrelationParams = CorrelationParams()
    gain_overrides_db: Tuple[Tuple[str, float], ...] = ()
    noise_dbm: float = -94.0
    snr_db: Tuple[float, ...] = (-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0)
    snr_reference: str = "cascade"
    common_phase: bool = True
    solver: SolverSettings = SolverSettings()
    pso: PsoSettings = PsoSettings()
    seed: int = 0
    trials: int = 1000
    threads: int = 1
    phases: str = "zero"
    phase_draws: int = 1
    explicit: frozenset = field(default=frozenset(), compare=False, repr=False)

    def __post_init__(self):
        if self.snr_reference not in ("cascade", "transmit"):
            raise ConfigError("must be 'cascade' or 'transmit'", field="snr_reference")
        if not self.snr_db:
            raise ConfigError("needs at least one value", field="snr_db")
        if self.trials < 1:
            raise ConfigError("must be >= 1", field="trials")
        if self.threads < 1:
            raise ConfigError("must be >= 1", field="threads")
        if self.phases not in ("zero", "random"):
            raise ConfigError("must be 'zero' or 'random'", field="phases")
        if self.phase_draws < 1:
            raise ConfigError("must be >= 1", field="phase_draws")
        if self.common_phase and self.dims.L1 != self.dims.L2:
            raise ConfigError("common_phase needs L1 == L2", field="common_phase")
        for link, _ in self.gain_overrides_db:
            if link not in LINKS:
                raise ConfigError(f"unknown link {link!r}", field="gamma")
        self.geometry.validate(self.dims)

    @cached_property
    def profile(self) -> CorrelationProfile:
        gains = {j: float(db_to_linear(v)) for j, v in self.gain_overrides_db}
        return build_profile(self.geometry, self.dims, self.correlation, gains or None)

    @property
    def reference_gain(self) -> float:
        if self.snr_reference == "transmit":
            return 1.0
        g = link_gains(self.geometry, self.correlation)
        return g["1"] * g["3"]

    def power_dbm(self, snr_db: float) -> float:
        return float(snr_db + self.noise_dbm - linear_to_db(self.reference_gain))

    def link(self, snr_db: float, profile: Optional[CorrelationProfile] = None) -> Link:
        """Noise-normalised link: unit noise, power ``P / noise``."""
        power = float(db_to_linear(snr_db)) / self.reference_gain
        return Link(self.profile if profile is None else profile, 1.0, power)

    def baseline_inputs(self, link: Link):
        """``Q = (P/M) I`` and the phase configurations an unoptimised rate averages over.

        ``phases = zero`` gives the single all-zero configuration; ``random``
        gives ``phase_draws`` uniform draws seeded from ``seed``.
        """
        d = link.dims
        Q = TransmitCovariance.isotropic(d.M, link.power)
        if self.phases == "zero":
            return Q, [PhaseConfig.zeros(d.L1, d.L2, self.common_phase)]
        return Q, [PhaseConfig.random(d.L1, d.L2, seed=[self.seed, k], common=self.common_phase)
                   for k in range(self.phase_draws)]

    def baseline_rate(self, link: Link, method: str = "asymptotic", trials: Optional[int] = None,
                      seed: Optional[int] = None, threads: int = 1):
        """Unoptimised rate ``(nats, stderr)``; stderr is ``None`` for the asymptotic method."""
        Q, configs = self.baseline_inputs(link)
        if method == "asymptotic":
            rates = [asymptotic_rate(link.profile, Q, ph, link.noise, self.solver) for ph in configs]
            return math.fsum(rates) / len(rates), None
        trials = self.trials if trials is None else trials
        seed = self.seed if seed is None else seed
        ests = [ergodic_rate_mc(link.profile, Q, ph, link.noise, trials, seed, threads) for ph in configs]
        k = len(ests)
        return (math.fsum(e.mean for e in ests) / k,
                math.sqrt(math.fsum(e.stderr ** 2 for e in ests)) / k)

    def at_desk_scale(self, L: int = DESK_L) -> "Scenario":
        """Shrink both surfaces to ``L`` elements unless the file set their size."""
        if self.explicit & {"system.L", "system.L1", "system.L2"}:
            return self
        g = replace(self.geometry, ris1_grid=None, ris2_grid=None)
        return replace(self, dims=replace(self.dims, L1=L, L2=L), geometry=g, explicit=self.explicit)

    def hash(self) -> str:
        return scenario_hash(self)


# ---------------------------------------------------------------- parsing

def _float(s):
    return float(s)


def _int(s):
    v = float(s)
    if v != int(v):
        raise ValueError(f"{s!r} is not an integer")
    return int(v)


def _bool(s):
    t = s.strip().lower()
    if t in ("true", "yes", "on", "1"):
        return True
    if t in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"{s!r} is not a boolean")


def _vec3(s):
    parts = [float(p) for p in s.replace(",", " ").split()]
    if len(parts) != 3:
        raise ValueError("expected three coordinates")
    return tuple(parts)


def _grid(s):
    if s.strip().lower() == "auto":
        return None
    r, c = s.lower().split("x")
    return (int(r), int(c))


def _floats(s):
    vals = tuple(float(p) for p in s.replace(",", " ").split())
    if not vals:
        raise ValueError("empty list")
    return vals


def _gain(s):
    return None if s.strip().lower() == "auto" else float(s)


def _str(s):
    return s.strip()


# section -> key -> converter
SCHEMA: Dict[str, Dict[str, object]] = {
    "system": {"M": _int, "N": _int, "L": _int, "L1": _int, "L2": _int},
    "geometry": {"bs": _vec3, "user": _vec3, "ris1": _vec3, "ris2": _vec3, "wavelength": _float,
                 "ris_spacing": _float, "antenna_spacing": _float, "ris1_grid": _grid,
                 "ris2_grid": _grid},
    "correlation": {"mean_angle_t": _float, "spread_t": _float, "mean_angle_r": _float,
                    "spread_r": _float, "gain_t_dbi": _float, "gain_r_dbi": _float,
                    "identity": _bool, **{f"gamma_{j}_db": _gain for j in LINKS}},
    "power": {"noise_dbm": _float, "snr_db": _floats, "snr_reference": _str},
    "optimizer": {"common_phase": _bool, "swarm_size": _int, "pso_iterations": _int,
                  "inertia": _float, "cognitive": _float, "social": _float,
                  "velocity_clamp": _float, "restarts": _int, "pso_seed": _int},
    "solver": {"tolerance": _float, "max_iterations": _int, "damping": _float, "initial": _float,
               "variant": _str},
    "run": {"seed": _int, "trials": _int, "threads": _int, "phases": _str, "phase_draws": _int},
}


def _read_pairs(text: str):
    section = None
    seen = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError("unterminated section header", line=lineno)
            section = line[1:-1].strip()
            if section not in SCHEMA:
                raise ConfigError(f"unknown section [{section}]", line=lineno)
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", line=lineno)
        key, value = (p.strip() for p in line.split("=", 1))
        if section is None:
            raise ConfigError("key outside any section", field=key, line=lineno)
        if key not in SCHEMA[section]:
            raise ConfigError(f"unknown key in [{section}]", field=key, line=lineno)
        full = f"{section}.{key}"
        if full in seen:
            raise ConfigError(f"duplicate key (first set on line {seen[full][0]})", field=key, line=lineno)
        try:
            seen[full] = (lineno, SCHEMA[section][key](value))
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc), field=key, line=lineno) from None
    return seen


# fields whose name differs from their key in the file
_FIELD_KEYS = {"iterations": "optimizer.pso_iterations", "seed": "optimizer.pso_seed",
               "dims": "system.M", "L": "system.L"}


def _located(exc, pairs) -> ConfigError:
    """Re-raise a validation failure with the file line of the offending key."""
    if isinstance(exc, ConfigError):
        fld, msg = exc.field, exc.message
    else:
        msg = str(exc)
        fld = msg.split()[0] if msg else None
        msg = msg[len(fld):].strip() if fld else msg
    key = _FIELD_KEYS.get(fld)
    if key not in pairs:
        key = next((k for k in pairs if k.split(".", 1)[1] == fld), None)
    if fld in ("L1", "L2") and key is None and "system.L" in pairs:
        key = "system.L"
    return ConfigError(msg, field=fld, line=pairs[key][0] if key else None)


def parse_scenario_text(text: str) -> Scenario:
    pairs = _read_pairs(text)
    try:
        return _assemble({k: val for k, (_, val) in pairs.items()}, frozenset(pairs))
    except (ConfigError, ValueError) as exc:
        raise _located(exc, pairs) from None


def _positive(v, key):
    val = v.get(key)
    if val is not None and not val > 0:
        raise ConfigError("must be positive", field=key.split(".", 1)[1])


def _assemble(v, explicit) -> Scenario:
    get = v.get
    for key in ("geometry.wavelength", "geometry.ris_spacing", "geometry.antenna_spacing",
                "correlation.spread_t", "correlation.spread_r"):
        _positive(v, key)
    L = get("system.L", 100)
    dims = SystemDims(get("system.M", 8), get("system.N", 4), get("system.L1", L), get("system.L2", L))
    lam = get("geometry.wavelength", 0.1)
    gd = NodeGeometry()
    geometry = NodeGeometry(
        bs=get("geometry.bs", gd.bs), user=get("geometry.user", gd.user),
        ris1=get("geometry.ris1", gd.ris1), ris2=get("geometry.ris2", gd.ris2),
        wavelength=lam, ris_spacing=get("geometry.ris_spacing", 0.5) * lam,
        antenna_spacing=get("geometry.antenna_spacing", 0.5),
        ris1_grid=get("geometry.ris1_grid"), ris2_grid=get("geometry.ris2_grid"))
    cd = CorrelationParams()
    corr = CorrelationParams(**{f.name: get(f"correlation.{f.name}", getattr(cd, f.name))
                                for f in fields(CorrelationParams)})
    overrides = tuple((j, get(f"correlation.gamma_{j}_db")) for j in LINKS
                      if get(f"correlation.gamma_{j}_db") is not None)
    sd = SolverSettings()
    variant = get("solver.variant", sd.variant)
    if variant not in VARIANTS:
        raise ConfigError(f"must be one of {', '.join(VARIANTS)}", field="variant")
    solver = SolverSettings(tolerance=get("solver.tolerance", sd.tolerance),
                            max_iterations=get("solver.max_iterations", sd.max_iterations),
                            damping=get("solver.damping", sd.damping),
                            initial=get("solver.initial", sd.initial), variant=variant)
    pd = PsoSettings()
    pso = PsoSettings(swarm_size=get("optimizer.swarm_size", pd.swarm_size),
                      iterations=get("optimizer.pso_iterations", pd.iterations),
                      inertia=get("optimizer.inertia", pd.inertia),
                      cognitive=get("optimizer.cognitive", pd.cognitive),
                      social=get("optimizer.social", pd.social),
                      velocity_clamp=get("optimizer.velocity_clamp", pd.velocity_clamp),
                      seed=get("optimizer.pso_seed", pd.seed),
                      restarts=get("optimizer.restarts", pd.restarts))
    return Scenario(dims=dims, geometry=geometry, correlation=corr, gain_overrides_db=overrides,
                    noise_dbm=get("power.noise_dbm", -94.0), snr_db=get("power.snr_db", Scenario.snr_db),
                    snr_reference=get("power.snr_reference", "cascade"),
                    common_phase=get("optimizer.common_phase", True), solver=solver, pso=pso,
                    seed=get("run.seed", 0), trials=get("run.trials", 1000),
                    threads=get("run.threads", 1), phases=get("run.phases", "zero"),
                    phase_draws=get("run.phase_draws", 1), explicit=explicit)


def parse_scenario(path) -> Scenario:
    return parse_scenario_text(Path(path).read_text())


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return repr(x)
    if isinstance(x, tuple):
        return ", ".join(_fmt(float(e)) for e in x)
    return str(x)


def echo(s: Scenario) -> str:
    """Normalised scenario text with every key resolved."""
    g, c, sv, p = s.geometry, s.correlation, s.solver, s.pso
    over = dict(s.gain_overrides_db)
    sections = {
        "system": {"M": s.dims.M, "N": s.dims.N, "L1": s.dims.L1, "L2": s.dims.L2},
        "geometry": {"bs": g.bs, "user": g.user, "ris1": g.ris1, "ris2": g.ris2,
                     "wavelength": float(g.wavelength),
                     "ris_spacing": float(g.element_pitch / g.wavelength),
                     "antenna_spacing": float(g.antenna_spacing),
                     "ris1_grid": "x".join(map(str, g.grid(1, s.dims.L1))),
                     "ris2_grid": "x".join(map(str, g.grid(2, s.dims.L2)))},
        "correlation": {**{f.name: getattr(c, f.name) for f in fields(c)},
                        **{f"gamma_{j}_db": float(over[j]) if j in over else "auto" for j in LINKS}},
        "power": {"noise_dbm": float(s.noise_dbm), "snr_db": tuple(s.snr_db),
                  "snr_reference": s.snr_reference},
        "optimizer": {"common_phase": s.common_phase, "swarm_size": p.swarm_size,
                      "pso_iterations": p.iterations, "inertia": float(p.inertia),
                      "cognitive": float(p.cognitive), "social": float(p.social),
                      "velocity_clamp": float(p.velocity_clamp), "restarts": p.restarts,
                      "pso_seed": p.seed},
        "solver": {"tolerance": float(sv.tolerance), "max_iterations": sv.max_iterations,
                   "damping": float(sv.damping), "initial": float(sv.initial), "variant": sv.variant},
        "run": {"seed": s.seed, "trials": s.trials, "threads": s.threads, "phases": s.phases,
                "phase_draws": s.phase_draws},
    }
    out = []
    for name, kv in sections.items():
        out.append(f"[{name}]")
        for k, val in kv.items():
            if isinstance(val, float):
                val = float(val)
            out.append(f"{k} = {_fmt(val)}")
        out.append("")
    return "\n".join(out)


def scenario_hash(s: Scenario) -> str:
    # threads never changes a result, so it stays out of the identity
    text = "\n".join(ln for ln in echo(s).splitlines() if not ln.startswith("threads"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


# ---------------------------------------------------------------- records

CSV_HEADER = ["scenario_hash", "axis", "value", "method", "rate_nats", "rate_bits", "stderr_nats", "status"]


@dataclass(frozen=True)
class ResultRecord:
    scenario_hash: str
    axis: str
    value: float
    method: str
    rate_nats: float
    stderr: Optional[float] = None
    wall_ms: float = 0.0
    status: str = "ok"

    @property
    def rate_bits(self) -> float:
        return self.rate_nats / LN2

    def row(self, timing=False):
        r = [self.scenario_hash, self.axis, repr(float(self.value)), self.method, repr(self.rate_nats),
             repr(self.rate_bits), "" if self.stderr is None else repr(self.stderr), self.status]
        return r + ([f"{self.wall_ms:.3f}"] if timing else [])


def records_to_csv(records: Sequence[ResultRecord], path=None, timing: bool = False) -> str:
    """CSV with :data:`CSV_HEADER` (plus ``wall_ms`` when ``timing``).

    Wall times are off by default so repeated runs give identical bytes.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER + (["wall_ms"] if timing else []))
    for r in records:
        w.writerow(r.row(timing))
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def read_records(path) -> List[ResultRecord]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for r in rows:
        out.append(ResultRecord(r["scenario_hash"], r["axis"], float(r["value"]), r["method"],
                                float(r["rate_nats"]), float(r["stderr_nats"]) if r["stderr_nats"] else None,
                                float(r.get("wall_ms") or 0.0), r["status"]))
    return out


# ---------------------------------------------------------------- validate

@dataclass(frozen=True)
class ValidationRow:
    snr_db: float
    asymptotic: float
    monte_carlo: float
    stderr: float
    rel_error: float
    passed: bool
    error: str = ""


@dataclass(frozen=True)
class ValidationReport:
    rows: Tuple[ValidationRow, ...]
    threshold: float
    trials: int
    seed: int

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    @property
    def max_rel_error(self) -> float:
        return max((r.rel_error for r in self.rows), default=float("nan"))

    def lines(self):
        yield f"{'snr_db':>7} {'asym_bits':>10} {'mc_bits':>10} {'rel_err':>8}  result"
        for r in self.rows:
            tag = "PASS" if r.passed else f"FAIL {r.error}".rstrip()
            yield (f"{r.snr_db:7.1f} {r.asymptotic / LN2:10.4f} {r.monte_carlo / LN2:10.4f} "
                   f"{100 * r.rel_error:7.2f}%  {tag}")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["snr_db", "asym_nats", "mc_nats", "mc_stderr_nats", "rel_error", "passed", "error"])
            for r in self.rows:
                w.writerow([repr(r.snr_db), repr(r.asymptotic), repr(r.monte_carlo), repr(r.stderr),
                            repr(r.rel_error), int(r.passed), r.error])


def relative_error(asym: float, mc: float) -> float:
    if mc == 0:
        return 0.0 if asym == 0 else float("inf")
    return abs(asym - mc) / abs(mc)


def run_validate(scenario: Scenario, trials: Optional[int] = None, seed: Optional[int] = None,
                 threshold: float = 0.03, threads: Optional[int] = None,
                 profile: Optional[CorrelationProfile] = None) -> ValidationReport:
    """Asymptotic rate against the Monte-Carlo mean at every SNR point.

    Uses ``Q = (P/M) I`` and the scenario's baseline phases.  The same seed is used at every SNR
    so the Monte-Carlo curve is built from common channel draws.  A point
    whose evaluation fails is reported as failed and the run continues.
    """
    trials = scenario.trials if trials is None else trials
    seed = scenario.seed if seed is None else seed
    threads = scenario.threads if threads is None else threads
    rows = []
    for snr in scenario.snr_db:
        link = scenario.link(snr, profile)
        try:
            asym, _ = scenario.baseline_rate(link)
            mc, se = scenario.baseline_rate(link, "montecarlo", trials, seed, threads)
        except DoubleRisError as exc:
            rows.append(ValidationRow(snr, float("nan"), float("nan"), float("nan"), float("inf"),
                                      False, type(exc).__name__))
            continue
        err = relative_error(asym, mc)
        rows.append(ValidationRow(snr, asym, mc, se, err, err <= threshold))
    return ValidationReport(tuple(rows), threshold, trials, seed)


# ---------------------------------------------------------------- sweep

AXES = ("snr", "element_count", "element_spacing", "antenna_count")
METHODS = ("asymptotic", "montecarlo", "optimized")


@dataclass(frozen=True)
class SweepSpec:
    """One-dimensional sweep.

    ``element_spacing`` values are in wavelengths, ``element_count`` sets both
    surfaces, ``antenna_count`` sets the BS array.  Non-SNR axes run at
    ``snr_db``, defaulting to the highest SNR of the scenario.
    """

    axis: str
    values: Tuple[float, ...]
    methods: Tuple[str, ...] = ("asymptotic",)
    snr_db: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "methods", tuple(self.methods))
        if self.axis not in AXES:
            raise ConfigError(f"must be one of {', '.join(AXES)}", field="axis")
        if not self.values:
            raise ConfigError("grid is empty", field="values")
        d = np.diff(self.values)
        if not (np.all(d > 0) or np.all(d < 0)):
            raise ConfigError("grid must be strictly monotone", field="values")
        bad = [m for m in self.methods if m not in METHODS]
        if bad or not self.methods:
            raise ConfigError(f"unknown method(s) {bad}", field="methods")
        if self.axis in ("element_count", "antenna_count"):
            if any(v != int(v) or v < 1 for v in self.values):
                raise ConfigError("counts must be positive integers", field="values")


def point_scenario(scenario: Scenario, axis: str, value: float) -> Tuple[Scenario, float]:
    """Scenario and SNR for one sweep point."""
    if axis == "snr":
        return scenario, value
    if axis == "element_count":
        n = int(value)
        g = replace(scenario.geometry, ris1_grid=None, ris2_grid=None)
        return replace(scenario, dims=replace(scenario.dims, L1=n, L2=n), geometry=g), None
    if axis == "element_spacing":
        g = replace(scenario.geometry, ris_spacing=value * scenario.geometry.wavelength)
        return replace(scenario, geometry=g), None
    if axis == "antenna_count":
        return replace(scenario, dims=replace(scenario.dims, M=int(value))), None
    raise ConfigError(f"unknown axis {axis!r}", field="axis")


def _run_point(scenario, spec, value, trials, seed, h):
    sc, snr = point_scenario(scenario, spec.axis, value)
    if snr is None:
        snr = spec.snr_db if spec.snr_db is not None else max(scenario.snr_db)
    out = []
    for method in spec.methods:
        t0 = time.perf_counter()
        stderr = None
        try:
            link = sc.link(snr)
            if method in ("asymptotic", "montecarlo"):
                rate, stderr = sc.baseline_rate(link, method, trials, seed)
            else:
                _, _, trace = alternating_optimize(link, sc.pso, sc.solver, common=sc.common_phase)
                rate = trace.final_rate
            status = "ok"
        except DoubleRisError as exc:
            rate, status = float("nan"), f"error:{type(exc).__name__}"
        out.append(ResultRecord(h, spec.axis, value, method, float(rate), stderr,
                                (time.perf_counter() - t0) * 1e3, status))
    return out


def run_sweep(scenario: Scenario, spec: SweepSpec, trials: Optional[int] = None,
              seed: Optional[int] = None, threads: Optional[int] = None,
              output=None, timing: bool = False) -> List[ResultRecord]:
    """Evaluate every method at every grid point, in grid order.

    Monte-Carlo points share one seed, so neighbouring points see the same
    channel draws.  Failures are recorded in the row's ``status`` and the sweep
    carries on.
    """
    trials = scenario.trials if trials is None else trials
    seed = scenario.seed if seed is None else seed
    threads = scenario.threads if threads is None else threads
    h = scenario_hash(scenario)
    with ThreadPoolExecutor(threads) as pool:
        parts = list(pool.map(lambda v: _run_point(scenario, spec, v, trials, seed, h), spec.values))
    records = [r for part in parts for r in part]
    if output is not None:
        records_to_csv(records, output, timing)
    return records


# ---------------------------------------------------------------- benchmarks

DEPLOYMENTS = (
    ("a", "double RIS", ()),
    ("b", "single reflections only", ("s",)),
    ("c", "RIS1 only", ("2", "4", "s")),
    ("d", "RIS2 only", ("1", "3", "s")),
    ("e", "double reflection only", ("2", "3")),
)


@dataclass(frozen=True)
class BenchmarkRow:
    key: str
    label: str
    rate_nats: float
    optimized: bool
    status: str = "ok"

    @property
    def rate_bits(self) -> float:
        return self.rate_nats / LN2


@dataclass(frozen=True)
class BenchmarkTable:
    rows: Tuple[BenchmarkRow, ...]
    snr_db: float

    def rate(self, key) -> float:
        return next(r.rate_nats for r in self.rows if r.key == key)

    def ordering_failures(self, tol: float = 1e-9) -> List[str]:
        """Deployment orderings that do not hold on this table."""
        if any(r.status != "ok" for r in self.rows):
            return ["some deployment failed to evaluate"]
        a, b, c, d, e = (self.rate(k) for k in "abcde")
        checks = [("a >= b", a >= b - tol), ("b >= c", b >= c - tol), ("b >= d", b >= d - tol),
                  ("a >= e", a >= e - tol), ("e > 0", e > 0), ("e smallest", e <= min(a, b, c, d) + tol)]
        return [name for name, ok in checks if not ok]

    def lines(self):
        for r in self.rows:
            yield f"({r.key}) {r.label:<26} {r.rate_bits:10.4f} bit/s/Hz  {r.status}"

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["key", "deployment", "snr_db", "optimized", "rate_nats", "rate_bits", "status"])
            for r in self.rows:
                w.writerow([r.key, r.label, repr(float(self.snr_db)), int(r.optimized),
                            repr(r.rate_nats), repr(r.rate_bits), r.status])


def run_benchmarks(scenario: Scenario, snr_db: Optional[float] = None,
                   optimize: bool = False) -> BenchmarkTable:
    """Rates of the five deployments obtained by switching off link statistics.

    All five use the transmit power of the full deployment at ``snr_db``.
    Without ``optimize`` each runs with ``Q = (P/M) I`` and the baseline phases.
    """
    snr = max(scenario.snr_db) if snr_db is None else snr_db
    rows = []
    for key, label, dead in DEPLOYMENTS:
        prof = scenario.profile.zeroed(*dead) if dead else scenario.profile
        link = scenario.link(snr, prof)
        try:
            if optimize:
                _, _, trace = alternating_optimize(link, scenario.pso, scenario.solver,
                                                   common=scenario.common_phase)
                rate = trace.final_rate
            else:
                rate, _ = scenario.baseline_rate(link)
            rows.append(BenchmarkRow(key, label, float(rate), optimize))
        except DoubleRisError as exc:
            rows.append(BenchmarkRow(key, label, float("nan"), optimize, f"error:{type(exc).__name__}"))
    return BenchmarkTable(tuple(rows), snr)
