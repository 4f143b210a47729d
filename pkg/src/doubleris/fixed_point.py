"""Deterministic equivalent of the ergodic rate.

The asymptotic rate is a free energy built from one log-determinant per node
(user, RIS1, RIS2, BS) minus one coupling product per link.  Its ten
auxiliary scalars are the stationary point of that free energy and are found
here by damped Picard iteration of the stationarity conditions.  All kernels
broadcast over leading batch axes so a whole particle swarm can be solved in
one call.
"""

from __future__ import annotations

import csv
from dataclasses import astuple, dataclass, field, fields
from typing import Optional

import numpy as np

from .channel import LINKS, CorrelationProfile, PhaseConfig, check_psd, psd_sqrt
from .errors import ConvergenceError, DivergenceError, MatrixError, NumericalError

STATE_NAMES = ("e1", "e2", "es", "e3", "e4", "et1", "et2", "ets", "et3", "et4")
VARIANTS = ("stationary", "literal", "phi2_single")


@dataclass(frozen=True)
class AuxiliaryState:
    """The ten auxiliary scalars; ``et*`` are the tilde (transmit-side) variables."""

    e1: float
    e2: float
    es: float
    e3: float
    e4: float
    et1: float
    et2: float
    ets: float
    et3: float
    et4: float
    iterations: int = field(default=0, compare=False)

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self)[:10], dtype=float)

    @classmethod
    def from_array(cls, x, iterations=0) -> "AuxiliaryState":
        return cls(*map(float, np.asarray(x)[:10]), iterations=iterations)


@dataclass(frozen=True, eq=False)
class TransformedProfile:
    """Correlations with the phases folded into ``T1, T2, Ts`` and ``Q`` into ``T3, T4``."""

    R: dict
    T: dict

    @property
    def dims(self):
        return (self.T["3"].shape[-1], self.R["1"].shape[-1],
                self.T["1"].shape[-1], self.T["2"].shape[-1])


@dataclass(frozen=True)
class SolverSettings:
    """Picard iteration controls.

    ``tolerance`` bounds the relative residual ``|x - f(x)| / max(|x|, |f(x)|)``
    of every variable.  ``variant`` selects the form of the RIS1 equations:
    ``"stationary"`` (default) uses the stationarity conditions of the rate
    expression, ``"literal"`` the expanded typeset form, and ``"phi2_single"``
    is a deliberately wrong reduction kept as a sensitivity probe.
    """

    tolerance: float = 1e-5
    max_iterations: int = 2000
    damping: float = 0.5
    initial: float = 1.0
    variant: str = "stationary"
    trace_path: Optional[str] = None

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")


def _hermitize(A):
    return (A + np.conj(np.swapaxes(A, -1, -2))) / 2


def _as_matrix(Q):
    return np.asarray(getattr(Q, "matrix", Q), dtype=complex)


def conjugate_phases(T, coeffs):
    """``diag(v)^H T diag(v)`` for (possibly batched) coefficient vectors ``v``."""
    v = np.asarray(coeffs)
    return np.conj(v)[..., :, None] * T * v[..., None, :]


def apply_transforms(profile: CorrelationProfile, Q, phases: PhaseConfig) -> TransformedProfile:
    """Fold ``Q`` and the RIS phases into the transmit correlations."""
    dims = profile.dims
    Qm = _as_matrix(Q)
    if Qm.shape != (dims.M, dims.M):
        raise MatrixError(f"expected {dims.M}x{dims.M}, got {Qm.shape}", "Q")
    if phases.theta1.size != dims.L1 or phases.theta2.size != dims.L2:
        raise MatrixError("phase vector length does not match RIS size", "phases")
    q_half = psd_sqrt(Qm, "Q")
    v1, v2 = phases.coeffs1, phases.coeffs2
    T = {
        "1": _hermitize(conjugate_phases(profile.T["1"], v1)),
        "2": _hermitize(conjugate_phases(profile.T["2"], v2)),
        "s": _hermitize(conjugate_phases(profile.T["s"], v2)),
        "3": _hermitize(q_half @ profile.T["3"] @ q_half),
        "4": _hermitize(q_half @ profile.T["4"] @ q_half),
    }
    return TransformedProfile(R=dict(profile.R), T=T)


def _tr(A, B):
    """Real part of ``Tr(A B)`` over the last two axes."""
    return np.einsum("...ij,...ji->...", A, B).real


def _eye(n):
    return np.eye(n, dtype=complex)


def _scalar(x, k):
    return x[..., k][..., None, None]


def update_map(x, tp: TransformedProfile, noise: float, variant: str = "stationary"):
    """Right-hand sides of the ten fixed-point equations evaluated at ``x``."""
    T, R = tp.T, tp.R
    M, N, L1, L2 = tp.dims
    e1, e2, es, e3, e4, t1, t2, ts, t3, t4 = (x[..., k] for k in range(10))
    s = lambda k: _scalar(x, k)  # noqa: E731

    K0 = noise * _eye(N) + s(0) * R["1"] + s(1) * R["2"]
    Z0 = np.linalg.solve(K0, np.concatenate([np.broadcast_to(R["1"], K0.shape),
                                             np.broadcast_to(R["2"], K0.shape)], axis=-1))
    new_t1 = np.trace(Z0[..., :N], axis1=-2, axis2=-1).real / L1
    new_t2 = np.trace(Z0[..., N:], axis1=-2, axis2=-1).real / L2

    A1 = s(2) * R["s"] + s(3) * R["3"]
    K1 = _eye(L1) + s(5) * (T["1"] @ A1)
    if variant == "literal":
        Zs = T["1"] @ (s(2) * R["s"])
        Psi_inv = np.linalg.inv(_eye(L1) + s(5) * Zs)
        B = _eye(L1) - s(5) * Zs @ Psi_inv
        Y = s(5) * T["1"] @ (s(3) * R["3"])
        C = np.linalg.inv(_eye(L1) + B @ Y)
        inner = Psi_inv @ Zs + C @ (B @ T["1"] @ (s(3) * R["3"]) - Zs @ Psi_inv @ Y)
        new_e1 = np.trace(inner, axis1=-2, axis2=-1).real / L1
        Xi = -s(5) * T["1"] @ R["s"] @ Psi_inv @ Y
        new_ts = np.trace(Psi_inv @ (s(5) * T["1"]) @ R["s"] + C @ Xi,
                          axis1=-2, axis2=-1).real / L2
        new_t3 = np.trace(C @ B @ (s(5) * T["1"]) @ R["3"], axis1=-2, axis2=-1).real / M
    else:
        Y1 = np.linalg.solve(K1, np.broadcast_to(T["1"], K1.shape))
        a = _tr(Y1, R["s"])
        b = _tr(Y1, R["3"])
        new_e1 = (es * a + e3 * b) / L1
        new_ts = t1 * a / L2
        new_t3 = t1 * b / M

    K2 = _eye(L2) + (s(7) * T["s"] + s(6) * T["2"]) @ (s(4) * R["4"])
    Z2 = np.linalg.solve(K2, np.concatenate([np.broadcast_to(T["2"], K2.shape),
                                             np.broadcast_to(T["s"], K2.shape)], axis=-1))
    c = _tr(Z2[..., :L2], R["4"])
    d = _tr(Z2[..., L2:], R["4"])
    new_e2 = e4 * c / L2
    new_es = e4 * d / L2
    if variant == "phi2_single":
        new_t4 = t2 * c / M
    else:
        new_t4 = (ts * d + t2 * c) / M

    K3 = _eye(M) + s(8) * T["3"] + s(9) * T["4"]
    Z3 = np.linalg.solve(K3, np.concatenate([np.broadcast_to(T["3"], K3.shape),
                                             np.broadcast_to(T["4"], K3.shape)], axis=-1))
    new_e3 = np.trace(Z3[..., :M], axis1=-2, axis2=-1).real / M
    new_e4 = np.trace(Z3[..., M:], axis1=-2, axis2=-1).real / M

    return np.stack([new_e1, new_e2, new_es, new_e3, new_e4,
                     new_t1, new_t2, new_ts, new_t3, new_t4], axis=-1)


def residuals(state, tp: TransformedProfile, noise: float, variant: str = "stationary") -> np.ndarray:
    """``x - f(x)`` for the ten equations."""
    x = state.as_array() if isinstance(state, AuxiliaryState) else np.asarray(state, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("state must be finite")
    return x - update_map(x, tp, noise, variant)


def relative_residual(x, fx):
    scale = np.maximum(np.abs(x), np.abs(fx))
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.where(scale > 0, np.abs(x - fx) / scale, 0.0)
    return r


def iterate(tp: TransformedProfile, noise: float, settings: SolverSettings = SolverSettings(),
            x0=None, batch_shape=()):
    """Damped Picard iteration; returns ``(x, converged, iterations, last_residual)``.

    Works on batched profiles: ``x`` has shape ``batch_shape + (10,)`` and
    entries that fail to converge are reported through ``converged``.
    """
    if noise <= 0:
        raise ValueError("noise power must be positive")
    if x0 is None:
        x = np.full(batch_shape + (10,), float(settings.initial))
    else:
        x = np.array(np.broadcast_to(x0, batch_shape + (10,)), dtype=float)
    gamma = settings.damping
    writer = None
    fh = None
    if settings.trace_path is not None:
        fh = open(settings.trace_path, "w", newline="")
        writer = csv.writer(fh)
        writer.writerow(["iteration", *STATE_NAMES, "residual_norm"])
    try:
        res = np.full(x.shape, np.inf)
        for it in range(1, settings.max_iterations + 1):
            with np.errstate(all="ignore"):
                fx = update_map(x, tp, noise, settings.variant)
            res = relative_residual(x, fx)
            if writer is not None:
                for row_x, row_r in zip(x.reshape(-1, 10), res.reshape(-1, 10)):
                    writer.writerow([it - 1, *map(repr, row_x), repr(float(np.max(row_r)))])
            bad = ~np.all(np.isfinite(fx), axis=-1)
            done = np.max(res, axis=-1) < settings.tolerance
            if np.all(done | bad):
                return x, done & ~bad, it - 1, res
            if not batch_shape and bad:
                raise DivergenceError("fixed-point iteration produced non-finite values; "
                                      "try a smaller damping factor", residuals=x - fx)
            step = (1 - gamma) * x + gamma * fx
            x = np.where(bad[..., None], x, step)
        converged = np.max(res, axis=-1) < settings.tolerance
        return x, converged, settings.max_iterations, res
    finally:
        if fh is not None:
            fh.close()


def solve_auxiliary(tp: TransformedProfile, noise: float, settings: SolverSettings = SolverSettings(),
                    initial: Optional[AuxiliaryState] = None) -> AuxiliaryState:
    """Solve the auxiliary system for a single transformed profile."""
    x0 = None if initial is None else initial.as_array()
    x, converged, its, res = iterate(tp, noise, settings, x0)
    if not bool(converged):
        raise ConvergenceError(f"no convergence after {its} iterations "
                               f"(max relative residual {np.max(res):.3e})",
                               residuals=x - update_map(x, tp, noise, settings.variant))
    return AuxiliaryState.from_array(x, iterations=its)


def _logdet(A, what):
    sign, logabs = np.linalg.slogdet(A)
    if np.any(np.abs(sign - 1) > 1e-6) or not np.all(np.isfinite(logabs)):
        raise NumericalError(f"log-det of a non-positive matrix in the {what} term")
    return logabs


def rate_terms(x, tp: TransformedProfile, noise: float) -> np.ndarray:
    """The four node log-dets and the negated coupling sum, shape ``(..., 5)``."""
    x = x.as_array() if isinstance(x, AuxiliaryState) else np.asarray(x, dtype=float)
    T, R = tp.T, tp.R
    M, N, L1, L2 = tp.dims
    s = lambda k: _scalar(x, k)  # noqa: E731
    user = _logdet(_eye(N) + (s(0) * R["1"] + s(1) * R["2"]) / noise, "user")
    ris1 = _logdet(_eye(L1) + s(5) * T["1"] @ (s(2) * R["s"] + s(3) * R["3"]), "RIS1")
    ris2 = _logdet(_eye(L2) + (s(7) * T["s"] + s(6) * T["2"]) @ (s(4) * R["4"]), "RIS2")
    bs = _logdet(_eye(M) + s(8) * T["3"] + s(9) * T["4"], "BS")
    e = x[..., :5]
    et = x[..., 5:]
    weights = np.array([L1, L2, L2, M, M], dtype=float)
    coupling = np.sum(weights * e * et, axis=-1)
    out = np.broadcast_arrays(user, ris1, ris2, bs, -coupling)
    return np.stack(out, axis=-1)


@dataclass(frozen=True)
class RateEvaluation:
    rate: float
    state: AuxiliaryState
    terms: np.ndarray
    transformed: TransformedProfile = field(repr=False)


def evaluate(profile: CorrelationProfile, Q, phases: PhaseConfig, noise: float,
             settings: SolverSettings = SolverSettings(),
             initial: Optional[AuxiliaryState] = None) -> RateEvaluation:
    """Solve the auxiliary system and return the rate with its ingredients."""
    Qm = _as_matrix(Q)
    check_psd(Qm, "Q", herm_atol=1e-10)
    tp = apply_transforms(profile, Qm, phases)
    state = solve_auxiliary(tp, noise, settings, initial)
    terms = rate_terms(state, tp, noise)
    return RateEvaluation(rate=float(np.sum(terms)), state=state, terms=terms, transformed=tp)


def asymptotic_rate(profile: CorrelationProfile, Q, phases: PhaseConfig, noise: float,
                    settings: SolverSettings = SolverSettings(),
                    initial: Optional[AuxiliaryState] = None) -> float:
    """Large-system ergodic rate in nats per channel use."""
    return evaluate(profile, Q, phases, noise, settings, initial).rate


def batch_rates(profile: CorrelationProfile, Q, theta1, theta2, noise: float,
                settings: SolverSettings = SolverSettings(), x0=None):
    """Rates for a stack of phase vectors ``theta1 (B, L1)``, ``theta2 (B, L2)``.

    Returns ``(rates, states)``; unconverged or failing entries get ``-inf``.
    """
    theta1 = np.atleast_2d(theta1)
    theta2 = np.atleast_2d(theta2)
    B = theta1.shape[0]
    Qm = _as_matrix(Q)
    q_half = psd_sqrt(Qm, "Q")
    v1, v2 = np.exp(1j * theta1), np.exp(1j * theta2)
    T = {
        "1": _hermitize(conjugate_phases(profile.T["1"], v1)),
        "2": _hermitize(conjugate_phases(profile.T["2"], v2)),
        "s": _hermitize(conjugate_phases(profile.T["s"], v2)),
        "3": _hermitize(q_half @ profile.T["3"] @ q_half),
        "4": _hermitize(q_half @ profile.T["4"] @ q_half),
    }
    tp = TransformedProfile(R=dict(profile.R), T=T)
    x, converged, _, _ = iterate(tp, noise, settings, x0, batch_shape=(B,))
    rates = np.full(B, -np.inf)
    ok = converged & np.all(np.isfinite(x), axis=-1)
    for b in np.flatnonzero(ok):
        tp_b = TransformedProfile(R=tp.R, T={j: (T[j][b] if T[j].ndim == 3 else T[j]) for j in LINKS})
        try:
            rates[b] = float(np.sum(rate_terms(x[b], tp_b, noise)))
        except NumericalError:
            pass
    return rates, x


def state_table(state: AuxiliaryState) -> dict:
    return {f.name: getattr(state, f.name) for f in fields(state) if f.name in STATE_NAMES}
