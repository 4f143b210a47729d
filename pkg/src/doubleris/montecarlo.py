"""Monte-Carlo ergodic rate, the ground truth for the deterministic equivalent.

Shares only the channel-model types with :mod:`doubleris.fixed_point`; the
rate here is the sample mean of ``log det(I + H Q H^H / noise)`` over seeded
channel draws.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .channel import ChannelDraw, CorrelationProfile, PhaseConfig, effective_channel, sample_channel
from .errors import NumericalError


@dataclass(frozen=True)
class McEstimate:
    mean: float
    stderr: float
    trials: int
    seed: int
    samples: np.ndarray = None

    @property
    def mean_bits(self) -> float:
        return self.mean / math.log(2)


def instantaneous_rate(draw: ChannelDraw, Q, phases: PhaseConfig, noise: float) -> float:
    """``log det(I + H_eff Q H_eff^H / noise)`` in nats."""
    if noise <= 0:
        raise ValueError("noise power must be positive")
    Qm = np.asarray(getattr(Q, "matrix", Q))
    H = effective_channel(draw, phases)
    G = np.eye(H.shape[0]) + (H @ Qm @ H.conj().T) / noise
    sign, logdet = np.linalg.slogdet((G + G.conj().T) / 2)
    if abs(sign - 1) > 1e-8 or not np.isfinite(logdet):
        raise NumericalError("log-det of a non-positive matrix")
    return float(max(logdet, 0.0))


def trial_seeds(seed: int, trials: int):
    """Independent per-trial seed sequences; trial ``i`` always gets the same stream."""
    return np.random.SeedSequence(seed).spawn(trials)


def _chunk_rates(profile, Q, phases, noise, seqs):
    return [instantaneous_rate(sample_channel(profile, np.random.default_rng(s)), Q, phases, noise)
            for s in seqs]


def ergodic_rate_mc(profile: CorrelationProfile, Q, phases: PhaseConfig, noise: float,
                    trials: int = 1000, seed: int = 0, workers: int = 1,
                    keep_samples: bool = False) -> McEstimate:
    """Average instantaneous rate over ``trials`` seeded channel draws.

    Every trial draws from its own spawned seed stream, so the result does not
    depend on ``workers``; the sum is taken with ``math.fsum`` in trial order.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    seqs = trial_seeds(seed, trials)
    if workers > 1:
        chunks = [seqs[i::workers] for i in range(workers)]
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda c: _chunk_rates(profile, Q, phases, noise, c), chunks))
        rates = np.empty(trials)
        for i, part in enumerate(parts):
            rates[i::workers] = part
    else:
        rates = np.array(_chunk_rates(profile, Q, phases, noise, seqs))
    mean = math.fsum(rates) / trials
    if trials > 1:
        var = math.fsum((rates - mean) ** 2) / (trials - 1)
        stderr = math.sqrt(var / trials)
    else:
        stderr = 0.0
    return McEstimate(mean=mean, stderr=stderr, trials=trials, seed=seed,
                      samples=rates if keep_samples else None)
