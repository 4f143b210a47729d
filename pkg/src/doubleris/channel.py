"""Geometry, path loss, spatial correlation and Kronecker channel sampling.

Link naming follows the cascade ``BS -> RIS -> user``: ``"1"`` is RIS1-user,
``"2"`` RIS2-user, ``"3"`` BS-RIS1, ``"4"`` BS-RIS2 and ``"s"`` the inter-RIS
link RIS2-RIS1.  RIS1 is the surface close to the user.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.linalg import toeplitz

from .errors import ConfigError, MatrixError, NumericalError

LINKS = ("1", "2", "s", "3", "4")

HERMITIAN_ATOL = 1e-12
PSD_ATOL = 1e-10


@dataclass(frozen=True)
class SystemDims:
    """Antenna / element counts: BS ``M``, user ``N``, RIS sizes ``L1``, ``L2``."""

    M: int
    N: int
    L1: int
    L2: int

    def __post_init__(self):
        for name in ("M", "N", "L1", "L2"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ConfigError(f"must be a positive integer, got {value!r}", field=name)

    @property
    def ratios(self) -> Tuple[float, float, float, float]:
        """``(L1/M, L2/M, N/L1, N/L2)``."""
        return (self.L1 / self.M, self.L2 / self.M, self.N / self.L1, self.N / self.L2)

    def shape(self, link: str) -> Tuple[int, int]:
        """(rows, cols) of the channel matrix of ``link``."""
        return {
            "1": (self.N, self.L1),
            "2": (self.N, self.L2),
            "s": (self.L1, self.L2),
            "3": (self.L1, self.M),
            "4": (self.L2, self.M),
        }[link]

    def norm_dim(self, link: str) -> int:
        """Dimension whose inverse is the variance of the i.i.d. kernel entries."""
        return {"1": self.L1, "2": self.L2, "s": self.L2, "3": self.M, "4": self.M}[link]

    def trace_targets(self, gamma: Mapping[str, float]) -> dict:
        """Prescribed ``(Tr R_j, Tr T_j)`` for each link given large-scale gains."""
        M, N, L1, L2 = self.M, self.N, self.L1, self.L2
        return {
            "1": (N, L1 ** 2 * gamma["1"]),
            "2": (N, L2 ** 2 * gamma["2"]),
            "s": (L1, L2 ** 2 * gamma["s"]),
            "3": (L1, M * gamma["3"]),
            "4": (L2, M * gamma["4"]),
        }


def _square_grid(n: int) -> Tuple[int, int]:
    rows = int(math.isqrt(n))
    while n % rows:
        rows -= 1
    return rows, n // rows


@dataclass(frozen=True)
class NodeGeometry:
    """Node positions in metres and array layout parameters.

    ``ris_spacing`` is the RIS element pitch in metres (``None`` means half a
    wavelength); ``antenna_spacing`` is the BS/user ULA pitch in wavelengths.
    RIS grids default to the most square ``rows x cols`` factorisation.
    """

    bs: Tuple[float, float, float] = (1.0, 0.0, 5.0)
    user: Tuple[float, float, float] = (1.0, 50.0, 1.5)
    ris1: Tuple[float, float, float] = (0.0, 50.0, 3.0)
    ris2: Tuple[float, float, float] = (0.0, 0.0, 3.0)
    wavelength: float = 0.1
    ris_spacing: Optional[float] = None
    antenna_spacing: float = 0.5
    ris1_grid: Optional[Tuple[int, int]] = None
    ris2_grid: Optional[Tuple[int, int]] = None

    @property
    def element_pitch(self) -> float:
        return self.wavelength / 2 if self.ris_spacing is None else self.ris_spacing

    def distance(self, a: str, b: str) -> float:
        return float(np.linalg.norm(np.subtract(getattr(self, a), getattr(self, b))))

    def link_distances(self) -> dict:
        """Transmitter-receiver distance of every link."""
        return {
            "1": self.distance("ris1", "user"),
            "2": self.distance("ris2", "user"),
            "s": self.distance("ris2", "ris1"),
            "3": self.distance("bs", "ris1"),
            "4": self.distance("bs", "ris2"),
        }

    def grid(self, ris: int, n_elements: int) -> Tuple[int, int]:
        g = self.ris1_grid if ris == 1 else self.ris2_grid
        return _square_grid(n_elements) if g is None else tuple(g)

    def element_coords(self, ris: int, n_elements: int) -> np.ndarray:
        """Local in-plane coordinates ``(n_elements, 3)`` of a RIS, row-major."""
        rows, cols = self.grid(ris, n_elements)
        r, c = np.divmod(np.arange(rows * cols), cols)
        d = self.element_pitch
        return np.column_stack([np.zeros(rows * cols), c * d, r * d])

    def validate(self, dims: SystemDims) -> None:
        if self.wavelength <= 0:
            raise ConfigError("must be positive", field="wavelength")
        if self.element_pitch <= 0:
            raise ConfigError("must be positive", field="ris_spacing")
        if self.antenna_spacing <= 0:
            raise ConfigError("must be positive", field="antenna_spacing")
        for i, n in ((1, dims.L1), (2, dims.L2)):
            rows, cols = self.grid(i, n)
            if rows * cols != n:
                raise ConfigError(f"grid {rows}x{cols} does not hold {n} elements",
                                  field=f"ris{i}_grid")
        names = ("bs", "user", "ris1", "ris2")
        for k, a in enumerate(names):
            for b in names[k + 1:]:
                if self.distance(a, b) <= 0:
                    raise ConfigError(f"coincides with {b}", field=a)


@dataclass(frozen=True)
class CorrelationParams:
    """Integral-model angles (degrees) and antenna gains (dBi)."""

    mean_angle_t: float = 0.0
    spread_t: float = 5.0
    mean_angle_r: float = 0.0
    spread_r: float = 5.0
    gain_t_dbi: float = 5.0
    gain_r_dbi: float = 5.0
    identity: bool = False


def path_loss_linear(d, gain_t_dbi=5.0, gain_r_dbi=5.0):
    """Large-scale power gain ``G_t + G_r - 35.1 - 36.7 log10(d / 1 m)`` in linear scale."""
    d = np.asarray(d, dtype=float)
    if np.any(d < 1.0):
        raise ValueError(f"path-loss model is calibrated for d >= 1 m, got {d}")
    db = gain_t_dbi + gain_r_dbi - 35.1 - 36.7 * np.log10(d)
    out = 10.0 ** (db / 10.0)
    return float(out) if out.ndim == 0 else out


def _gaussian_phase_integral(lags, d_s, mean, spread, panels):
    nodes, weights = leggauss(32)
    edges = np.linspace(-180.0, 180.0, panels + 1)
    half = np.diff(edges) / 2
    mid = (edges[:-1] + edges[1:]) / 2
    phi = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
    w = (half[:, None] * weights[None, :]).ravel()
    density = np.exp(-((phi - mean) ** 2) / (2 * spread ** 2)) / math.sqrt(2 * math.pi * spread ** 2)
    phase = np.exp(2j * math.pi * d_s * np.outer(lags, np.sin(np.pi * phi / 180.0)))
    return phase @ (w * density)


def integral_correlation(n, d_s=0.5, mean_angle=0.0, spread=5.0, atol=1e-8, max_refine=14):
    """Angular-spread correlation of an ``n``-element ULA with pitch ``d_s`` wavelengths.

    Entry ``(m, k)`` integrates a Gaussian angular density (mean ``mean_angle``,
    spread ``spread``, both in degrees) against the array phase progression
    over ``[-180, 180]`` degrees.  The integral is evaluated with composite
    32-point Gauss-Legendre, doubling the panel count until two successive
    estimates agree to ``atol`` in every entry.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if spread <= 0:
        raise ValueError("angular spread must be positive")
    lags = np.arange(n)
    panels = 8
    prev = _gaussian_phase_integral(lags, d_s, mean_angle, spread, panels)
    for _ in range(max_refine):
        panels *= 2
        cur = _gaussian_phase_integral(lags, d_s, mean_angle, spread, panels)
        err = np.abs(cur - prev)
        if np.all(err < atol):
            return toeplitz(cur, np.conj(cur))
        prev = cur
    worst = int(np.argmax(err))
    raise NumericalError(f"quadrature did not converge for entry ({worst}, 0): "
                         f"last change {err[worst]:.3e}")


def sinc_correlation(coords, wavelength):
    """``sinc(2 |u_m - u_n| / wavelength)`` for element coordinates ``coords``."""
    coords = np.asarray(coords, dtype=float)
    if coords.ndim == 1:
        coords = coords[:, None]
    if wavelength <= 0:
        raise ValueError("wavelength must be positive")
    dist = np.linalg.norm(coords[:, None, :] - coords[None, :, :], axis=-1)
    off = dist[~np.eye(len(coords), dtype=bool)]
    if off.size and off.min() <= 0:
        raise ValueError("element coordinates must be distinct")
    return np.sinc(2.0 * dist / wavelength)


def psd_sqrt(A, name=None, atol=PSD_ATOL):
    """Hermitian square root; eigenvalues in ``(-atol*scale, 0)`` are clipped."""
    A = np.asarray(A)
    H = (A + A.conj().T) / 2
    w, U = np.linalg.eigh(H)
    scale = max(1.0, float(np.max(np.abs(w)))) if w.size else 1.0
    if w.size and w.min() < -atol * scale:
        raise MatrixError(f"not positive semi-definite (min eigenvalue {w.min():.3e})", name)
    w = np.clip(w, 0.0, None)
    return (U * np.sqrt(w)) @ U.conj().T


def check_psd(A, name=None, herm_atol=HERMITIAN_ATOL, psd_atol=PSD_ATOL):
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise MatrixError(f"expected a square matrix, got shape {A.shape}", name)
    scale = max(1.0, float(np.max(np.abs(A)))) if A.size else 1.0
    if np.max(np.abs(A - A.conj().T), initial=0.0) > herm_atol * scale:
        raise MatrixError("not Hermitian", name)
    w = np.linalg.eigvalsh((A + A.conj().T) / 2)
    if w.size and w.min() < -psd_atol * scale:
        raise MatrixError(f"not positive semi-definite (min eigenvalue {w.min():.3e})", name)


def _rescale(A, target, name):
    tr = float(np.trace(A).real)
    if target == 0:
        return np.zeros_like(A)
    if tr <= 0:
        raise ConfigError(f"cannot normalise a matrix with trace {tr}", field=name)
    return A * (target / tr)


@dataclass(frozen=True, eq=False)
class CorrelationProfile:
    """Receive/transmit correlations ``R[j]``, ``T[j]`` and gains ``gamma[j]`` per link."""

    R: Mapping[str, np.ndarray]
    T: Mapping[str, np.ndarray]
    gamma: Mapping[str, float] = field(default_factory=lambda: {j: 1.0 for j in LINKS})

    def __post_init__(self):
        R = {j: np.asarray(self.R[j], dtype=complex) for j in LINKS}
        T = {j: np.asarray(self.T[j], dtype=complex) for j in LINKS}
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "T", T)
        object.__setattr__(self, "gamma", {j: float(self.gamma.get(j, 1.0)) for j in LINKS})
        dims = self.dims
        for j in LINKS:
            rows, cols = dims.shape(j)
            if R[j].shape != (rows, rows) or T[j].shape != (cols, cols):
                raise MatrixError(f"shapes {R[j].shape}/{T[j].shape} do not fit a "
                                  f"{rows}x{cols} channel", f"link {j}")

    @property
    def dims(self) -> SystemDims:
        return SystemDims(M=self.T["3"].shape[0], N=self.R["1"].shape[0],
                          L1=self.T["1"].shape[0], L2=self.T["2"].shape[0])

    @cached_property
    def sqrt_factors(self) -> dict:
        return {j: (psd_sqrt(self.R[j], f"R{j}"), psd_sqrt(self.T[j], f"T{j}")) for j in LINKS}

    def check(self, normalized=True, rtol=1e-10) -> None:
        """Raise if any matrix is not Hermitian PSD or violates the trace targets."""
        for j in LINKS:
            check_psd(self.R[j], f"R{j}")
            check_psd(self.T[j], f"T{j}")
        if not normalized:
            return
        for j, (tr_r, tr_t) in self.dims.trace_targets(self.gamma).items():
            for name, A, target in ((f"R{j}", self.R[j], tr_r), (f"T{j}", self.T[j], tr_t)):
                got = float(np.trace(A).real)
                if abs(got - target) > rtol * max(abs(target), 1e-300):
                    raise MatrixError(f"trace {got!r} != {target!r}", name)

    def zeroed(self, *links: str) -> "CorrelationProfile":
        """Copy with the statistics (both sides) of ``links`` set to zero."""
        R = dict(self.R)
        T = dict(self.T)
        gamma = dict(self.gamma)
        for j in links:
            R[j] = np.zeros_like(R[j])
            T[j] = np.zeros_like(T[j])
            gamma[j] = 0.0
        return CorrelationProfile(R, T, gamma)

    def scaled(self, factor: float, links: Sequence[str] = LINKS) -> "CorrelationProfile":
        """Copy with ``T[j]`` multiplied by ``factor`` for each link in ``links``."""
        T = dict(self.T)
        gamma = dict(self.gamma)
        for j in links:
            T[j] = T[j] * factor
            gamma[j] = gamma[j] * factor
        return CorrelationProfile(dict(self.R), T, gamma)

    @classmethod
    def identity(cls, dims: SystemDims, gamma: Optional[Mapping[str, float]] = None):
        """Uncorrelated profile meeting the trace targets."""
        gamma = {j: 1.0 for j in LINKS} if gamma is None else dict(gamma)
        R, T = {}, {}
        for j, (tr_r, tr_t) in dims.trace_targets(gamma).items():
            rows, cols = dims.shape(j)
            R[j] = np.eye(rows) * (tr_r / rows)
            T[j] = np.eye(cols) * (tr_t / cols)
        return cls(R, T, gamma)


def link_gains(geometry: NodeGeometry, params: CorrelationParams = CorrelationParams()) -> dict:
    return {j: path_loss_linear(d, params.gain_t_dbi, params.gain_r_dbi)
            for j, d in geometry.link_distances().items()}


def build_profile(geometry: NodeGeometry, dims: SystemDims,
                  params: CorrelationParams = CorrelationParams(),
                  gains: Optional[Mapping[str, float]] = None) -> CorrelationProfile:
    """Assemble the correlation profile of a deployment.

    BS and user arrays use the angular-spread integral model, RIS arrays the
    sinc model over their element grid.  Every matrix is then rescaled so its
    trace hits the normalisation target of its link; the large-scale gain of
    each link lives entirely in the transmit-side trace.  ``gains`` overrides
    the path-loss gains per link.
    """
    geometry.validate(dims)
    gamma = link_gains(geometry, params)
    if gains is not None:
        gamma.update({j: float(g) for j, g in gains.items()})
    if params.identity:
        return CorrelationProfile.identity(dims, gamma)

    d_s = geometry.antenna_spacing
    t_bs = integral_correlation(dims.M, d_s, params.mean_angle_t, params.spread_t)
    r_user = integral_correlation(dims.N, d_s, params.mean_angle_r, params.spread_r)
    ris1 = sinc_correlation(geometry.element_coords(1, dims.L1), geometry.wavelength)
    ris2 = sinc_correlation(geometry.element_coords(2, dims.L2), geometry.wavelength)
    raw_r = {"1": r_user, "2": r_user, "s": ris1, "3": ris1, "4": ris2}
    raw_t = {"1": ris1, "2": ris2, "s": ris2, "3": t_bs, "4": t_bs}
    R, T = {}, {}
    for j, (tr_r, tr_t) in dims.trace_targets(gamma).items():
        R[j] = _rescale(raw_r[j], tr_r, f"R{j}")
        T[j] = _rescale(raw_t[j], tr_t, f"T{j}")
    return CorrelationProfile(R, T, gamma)


@dataclass(frozen=True, eq=False)
class ChannelDraw:
    """One realisation of the five link matrices."""

    H1: np.ndarray
    H2: np.ndarray
    Hs: np.ndarray
    H3: np.ndarray
    H4: np.ndarray

    def __post_init__(self):
        N, L1 = self.H1.shape
        L2 = self.H2.shape[1]
        M = self.H3.shape[1]
        expected = {"H2": (N, L2), "Hs": (L1, L2), "H3": (L1, M), "H4": (L2, M)}
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise MatrixError(f"expected shape {shape}, got {getattr(self, name).shape}", name)


def _generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_channel(profile: CorrelationProfile, seed=None) -> ChannelDraw:
    """Draw ``H_j = R_j^{1/2} W_j T_j^{1/2}`` with ``W_j`` i.i.d. CN(0, 1/D_j)."""
    rng = _generator(seed)
    dims = profile.dims
    sq = profile.sqrt_factors
    H = {}
    for j in LINKS:
        rows, cols = dims.shape(j)
        var = 1.0 / dims.norm_dim(j)
        W = (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))) * math.sqrt(var / 2)
        r_half, t_half = sq[j]
        H[j] = r_half @ W @ t_half
    return ChannelDraw(H1=H["1"], H2=H["2"], Hs=H["s"], H3=H["3"], H4=H["4"])


@dataclass(frozen=True, eq=False)
class PhaseConfig:
    """RIS phase vectors, stored wrapped into ``[0, 2*pi)``."""

    theta1: np.ndarray
    theta2: np.ndarray
    common: bool = False

    def __post_init__(self):
        t1 = np.mod(np.asarray(self.theta1, dtype=float).ravel(), 2 * np.pi)
        t2 = np.mod(np.asarray(self.theta2, dtype=float).ravel(), 2 * np.pi)
        # mod can round 2*pi - tiny up to exactly 2*pi
        t1[t1 >= 2 * np.pi] = 0.0
        t2[t2 >= 2 * np.pi] = 0.0
        if self.common and (t1.shape != t2.shape or not np.array_equal(t1, t2)):
            raise ConfigError("common-phase configuration needs L1 == L2 and theta1 == theta2",
                              field="common_phase")
        object.__setattr__(self, "theta1", t1)
        object.__setattr__(self, "theta2", t2)

    @property
    def coeffs1(self) -> np.ndarray:
        return np.exp(1j * self.theta1)

    @property
    def coeffs2(self) -> np.ndarray:
        return np.exp(1j * self.theta2)

    @classmethod
    def zeros(cls, L1: int, L2: int, common: bool = False):
        return cls(np.zeros(L1), np.zeros(L2), common)

    @classmethod
    def shared(cls, theta):
        return cls(theta, np.array(theta, dtype=float, copy=True), True)

    @classmethod
    def random(cls, L1: int, L2: int, seed=None, common: bool = False):
        rng = _generator(seed)
        if common:
            if L1 != L2:
                raise ConfigError("common phase needs L1 == L2", field="common_phase")
            return cls.shared(rng.uniform(0, 2 * np.pi, L1))
        return cls(rng.uniform(0, 2 * np.pi, L1), rng.uniform(0, 2 * np.pi, L2))

    def digest(self) -> str:
        h = hashlib.sha1(np.ascontiguousarray(self.theta1).tobytes())
        h.update(np.ascontiguousarray(self.theta2).tobytes())
        return h.hexdigest()[:12]


def effective_channel(draw: ChannelDraw, phases: PhaseConfig) -> np.ndarray:
    """``H1 Th1 H3 + H2 Th2 H4 + H1 Th1 Hs Th2 H4``."""
    v1 = phases.coeffs1
    v2 = phases.coeffs2
    if v1.size != draw.H1.shape[1] or v2.size != draw.H2.shape[1]:
        raise ConfigError("phase vector length does not match the RIS size", field="phases")
    g1 = draw.H1 * v1[None, :]
    g4 = v2[:, None] * draw.H4
    return g1 @ draw.H3 + draw.H2 @ g4 + g1 @ (draw.Hs @ g4)


@dataclass(frozen=True, eq=False)
class Link:
    """A fully resolved link: statistics, noise power and transmit power budget (linear)."""

    profile: CorrelationProfile
    noise: float = 1.0
    power: float = 1.0

    def __post_init__(self):
        if not self.noise > 0:
            raise ConfigError("must be positive", field="noise")
        if self.power < 0:
            raise ConfigError("must be non-negative", field="power")

    @property
    def dims(self) -> SystemDims:
        return self.profile.dims

    def with_profile(self, profile: CorrelationProfile) -> "Link":
        return Link(profile, self.noise, self.power)

    def with_power(self, power: float) -> "Link":
        return Link(self.profile, self.noise, power)
