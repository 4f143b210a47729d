"""Statistical-CSI rate maximisation.

Transmit covariance: iterated water-filling over ``F = et3 T3 + et4 T4``
with the auxiliary variables refreshed between steps.  RIS phases: a
global-best particle swarm on the torus ``[0, 2 pi)^D``.  Both are wrapped in
an alternating loop that never accepts a step lowering the rate.
"""

from __future__ import annotations

import csv
import hashlib
import math
import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .channel import Link, PhaseConfig, check_psd
from .errors import ConvergenceError, DegenerateError, DoubleRisError, MatrixError
from .fixed_point import SolverSettings, batch_rates, evaluate

TWO_PI = 2 * np.pi


@dataclass(frozen=True, eq=False)
class TransmitCovariance:
    """Hermitian PSD source covariance with trace budget ``power``."""

    matrix: np.ndarray
    power: float

    def __post_init__(self):
        Q = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "matrix", Q)
        check_psd(Q, "Q", herm_atol=1e-12)
        if np.trace(Q).real > self.power + 1e-8 * max(1.0, self.power):
            raise MatrixError(f"trace {np.trace(Q).real} exceeds the budget {self.power}", "Q")

    @classmethod
    def isotropic(cls, M: int, power: float) -> "TransmitCovariance":
        return cls(np.eye(M) * (power / M), power)

    def digest(self) -> str:
        return hashlib.sha1(np.ascontiguousarray(np.round(self.matrix, 12)).tobytes()).hexdigest()[:12]


def water_filling(F, power: float, rel_floor: float = 1e-14) -> TransmitCovariance:
    """Maximiser of ``log det(I + F Q)`` subject to ``Tr Q <= power``, ``Q >= 0``.

    Modes of ``F`` below ``rel_floor`` times its largest eigenvalue get no power.
    The water level is bracketed by bisection, which fixes the active set; the
    level is then solved exactly on that set so the budget is met to rounding.
    """
    if not power > 0:
        raise ValueError("power must be positive")
    F = np.asarray(F, dtype=complex)
    F = (F + F.conj().T) / 2
    lam, U = np.linalg.eigh(F)
    top = lam.max() if lam.size else 0.0
    if not top > 0:
        raise DegenerateError("F has no positive eigenvalue; nothing to allocate power to")
    usable = lam > rel_floor * top
    inv = np.full(lam.shape, np.inf)
    inv[usable] = 1.0 / lam[usable]

    lo, hi = 0.0, power + inv[usable].max()
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.sum(np.clip(mid - inv[usable], 0, None)) > power:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-15 * hi:
            break
    active = usable & (inv < hi)
    level = (power + inv[active].sum()) / active.sum()
    p = np.where(active, level - np.where(active, inv, 0.0), 0.0)
    p = np.clip(p, 0, None)
    Q = (U * p) @ U.conj().T
    return TransmitCovariance((Q + Q.conj().T) / 2, power)


@dataclass(frozen=True)
class AoRecord:
    iteration: int
    rate: float
    q_digest: str
    phase_digest: str
    wall_ms: float


@dataclass
class AoTrace:
    """Rate history of an optimisation loop (nats)."""

    records: List[AoRecord] = field(default_factory=list)

    def add(self, iteration, rate, Q, phases, start):
        self.records.append(AoRecord(iteration, float(rate), Q.digest(), phases.digest(),
                                     (time.perf_counter() - start) * 1e3))

    @property
    def rates(self) -> np.ndarray:
        return np.array([r.rate for r in self.records])

    @property
    def final_rate(self) -> float:
        return self.records[-1].rate

    def is_monotone(self, eps: float = 1e-5) -> bool:
        return bool(np.all(np.diff(self.rates) >= -eps))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "rate_nats", "rate_bits", "wall_ms"])
            for r in self.records:
                w.writerow([r.iteration, repr(r.rate), repr(r.rate / math.log(2)), f"{r.wall_ms:.3f}"])


def _f_matrix(link: Link, state):
    T = link.profile.T
    return state.et3 * T["3"] + state.et4 * T["4"]


def optimize_q(link: Link, phases: PhaseConfig, settings: SolverSettings = SolverSettings(),
               eps: float = 1e-5, max_outer: int = 200,
               initial: Optional[TransmitCovariance] = None):
    """Iterated water-filling for fixed phases.

    Starts from ``(P/M) I`` unless ``initial`` is given, and stops once the
    rate changes by less than ``eps``.  Returns ``(Q, trace)``.
    """
    M = link.dims.M
    start = time.perf_counter()
    trace = AoTrace()
    if link.power == 0:
        Q = TransmitCovariance(np.zeros((M, M)), 0.0)
        trace.add(0, 0.0, Q, phases, start)
        return Q, trace
    Q = initial if initial is not None else TransmitCovariance.isotropic(M, link.power)
    ev = evaluate(link.profile, Q, phases, link.noise, settings)
    trace.add(0, ev.rate, Q, phases, start)
    for n in range(1, max_outer + 1):
        try:
            Q_new = water_filling(_f_matrix(link, ev.state), link.power)
        except DegenerateError:
            # nothing reaches the receiver: any feasible Q is optimal
            return Q, trace
        ev_new = evaluate(link.profile, Q_new, phases, link.noise, settings, initial=ev.state)
        trace.add(n, ev_new.rate, Q_new, phases, start)
        change = abs(ev_new.rate - ev.rate)
        Q, ev = Q_new, ev_new
        if change < eps:
            return Q, trace
    raise ConvergenceError(f"covariance iteration did not settle within {max_outer} steps",
                           trace=trace)


@dataclass(frozen=True)
class PsoSettings:
    swarm_size: int = 40
    iterations: int = 100
    inertia: float = 0.729
    cognitive: float = 1.49445
    social: float = 1.49445
    velocity_clamp: float = np.pi
    seed: int = 0
    restarts: int = 1

    def __post_init__(self):
        if self.swarm_size < 2:
            raise ValueError("swarm_size must be >= 2")
        if min(self.inertia, self.cognitive, self.social, self.velocity_clamp) <= 0:
            raise ValueError("PSO coefficients must be positive")
        if self.iterations < 0 or self.restarts < 1:
            raise ValueError("iterations must be >= 0 and restarts >= 1")


@dataclass(frozen=True, eq=False)
class PsoResult:
    phases: PhaseConfig
    fitness: float
    initial_fitness: np.ndarray
    final_fitness: np.ndarray
    history: np.ndarray


def _wrap_diff(a):
    return (a + np.pi) % TWO_PI - np.pi


def _split(x, L1, common):
    return (x, x) if common else (x[..., :L1], x[..., L1:])


def pso_phases(link: Link, Q, pso: PsoSettings = PsoSettings(), common: bool = True,
               settings: SolverSettings = SolverSettings(),
               incumbent: Optional[PhaseConfig] = None) -> PsoResult:
    """Particle-swarm search of the RIS phases maximising the asymptotic rate at fixed ``Q``.

    Positions live on the torus, so attraction terms use wrapped differences
    and positions are reduced modulo ``2 pi`` after each move.  A particle
    whose rate evaluation fails scores ``-inf`` for that step.  ``incumbent``,
    when given, replaces the first random particle.
    """
    dims = link.dims
    L1, L2 = dims.L1, dims.L2
    if common and L1 != L2:
        raise ValueError("common-phase search needs L1 == L2")
    D = L1 if common else L1 + L2
    S = pso.swarm_size

    def fitness(x, x0):
        t1, t2 = _split(x, L1, common)
        return batch_rates(link.profile, Q, t1, t2, link.noise, settings, x0)

    best_overall = None
    for restart in range(pso.restarts):
        rng = np.random.default_rng([pso.seed, restart])
        x = rng.uniform(0, TWO_PI, (S, D))
        if incumbent is not None and restart == 0:
            x[0] = incumbent.theta1 if common else np.concatenate([incumbent.theta1, incumbent.theta2])
        v = rng.uniform(-pso.velocity_clamp, pso.velocity_clamp, (S, D))
        f, states = fitness(x, None)
        initial_fitness = f.copy()
        pbest, pbest_f = x.copy(), f.copy()
        g = int(np.argmax(pbest_f))
        history = [pbest_f[g]]
        for _ in range(pso.iterations):
            r1 = rng.random((S, D))
            r2 = rng.random((S, D))
            v = (pso.inertia * v
                 + pso.cognitive * r1 * _wrap_diff(pbest - x)
                 + pso.social * r2 * _wrap_diff(pbest[g] - x))
            v = np.clip(v, -pso.velocity_clamp, pso.velocity_clamp)
            x = np.mod(x + v, TWO_PI)
            seed_states = np.where(np.isfinite(states), states, 1.0)
            f, states = fitness(x, seed_states)
            better = f > pbest_f
            pbest[better] = x[better]
            pbest_f[better] = f[better]
            g = int(np.argmax(pbest_f))
            history.append(pbest_f[g])
        if not np.isfinite(pbest_f[g]):
            raise DoubleRisError("no particle produced a finite rate")
        t1, t2 = _split(pbest[g], L1, common)
        phases = PhaseConfig(t1, t2, common)
        result = PsoResult(phases, float(pbest_f[g]), initial_fitness, f, np.array(history))
        if best_overall is None or result.fitness > best_overall.fitness:
            best_overall = result
    return best_overall


def alternating_optimize(link: Link, pso: PsoSettings = PsoSettings(),
                         settings: SolverSettings = SolverSettings(), common: bool = True,
                         eps: float = 1e-5, max_outer: int = 30, seed: Optional[int] = None,
                         initial_phases: Optional[PhaseConfig] = None):
    """Alternate covariance water-filling and swarm phase search until the rate settles.

    The initial phases are uniform on ``[0, 2 pi)`` (seeded by ``seed``,
    defaulting to ``pso.seed``) and the initial covariance is ``(P/M) I``.
    A step whose result is worse than the incumbent is discarded, so the
    recorded rate never decreases.  Returns ``(Q, phases, trace)``; on failure
    the raised error carries the partial trace.
    """
    dims = link.dims
    start = time.perf_counter()
    trace = AoTrace()
    seed = pso.seed if seed is None else seed
    if initial_phases is None:
        phases = PhaseConfig.random(dims.L1, dims.L2, seed=seed, common=common)
    else:
        phases = initial_phases
    if link.power == 0:
        Q = TransmitCovariance(np.zeros((dims.M, dims.M)), 0.0)
        trace.add(0, 0.0, Q, phases, start)
        return Q, phases, trace
    Q = TransmitCovariance.isotropic(dims.M, link.power)
    try:
        rate = evaluate(link.profile, Q, phases, link.noise, settings).rate
        trace.add(0, rate, Q, phases, start)
        for n in range(1, max_outer + 1):
            prev = rate
            Q_new, q_trace = optimize_q(link, phases, settings, eps=eps, initial=Q)
            if q_trace.final_rate >= rate:
                Q, rate = Q_new, q_trace.final_rate
            step = PsoSettings(**{**pso.__dict__, "seed": pso.seed + n})
            res = pso_phases(link, Q, step, common, settings, incumbent=phases)
            if res.fitness > rate:
                phases, rate = res.phases, res.fitness
            trace.add(n, rate, Q, phases, start)
            if abs(rate - prev) < eps:
                return Q, phases, trace
    except DoubleRisError as exc:
        if getattr(exc, "trace", None) is None:
            exc.trace = trace
        raise
    raise ConvergenceError(f"alternating optimisation did not settle within {max_outer} rounds",
                           trace=trace)
