"""Log-normal AR(1) fading: marginals, trace generation, estimation, spectra.

The AR(1) recursion runs on the log-gain ``X = ln h``::

    X_0 ~ N(m, sigma^2)
    X_j = m (1 - a1) + a1 X_{j-1} + w_j,   w_j ~ N(0, sigma^2 (1 - a1^2))

so every ``X_j`` is marginally N(m, sigma^2) and ``h_j = exp(X_j)`` is
log-normal with positive correlation ``a1 = exp(-2 pi fd Ts)`` between
consecutive slots.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy import integrate
from scipy.special import ndtr, ndtri

from . import kernels
from .errors import DegenerateInputError, DomainError

__all__ = [
    "LognormalParams",
    "Ar1Params",
    "ChannelTrace",
    "QuantizedChain",
    "lognormal_pdf",
    "lognormal_moments",
    "gen_ar1_trace",
    "estimate_a1",
    "psd_ar1",
    "quantize_chain",
    "stationary_distribution",
]


@dataclass(frozen=True)
class LognormalParams:
    """Mean ``m`` and standard deviation ``sigma`` of the natural-log gain."""

    m: float = -0.5
    sigma: float = 1.0

    def __post_init__(self):
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise DomainError(f"LognormalParams.sigma must be > 0, got {self.sigma}")
        if not math.isfinite(self.m):
            raise DomainError(f"LognormalParams.m must be finite, got {self.m}")


@dataclass(frozen=True)
class Ar1Params:
    """Doppler spread ``fd`` (Hz) and slot period ``ts`` (s).

    ``a1`` is always derived as ``exp(-2 pi fd ts)``; use :meth:`from_a1` to
    specify the correlation directly. ``fd = inf`` gives a white process.
    """

    fd: float
    ts: float

    def __post_init__(self):
        if not self.ts > 0:
            raise DomainError(f"Ar1Params.ts must be > 0, got {self.ts}")
        if not self.fd >= 0:
            raise DomainError(f"Ar1Params.fd must be >= 0, got {self.fd}")

    @property
    def a1(self) -> float:
        return math.exp(-2.0 * math.pi * self.fd * self.ts)

    @property
    def beta(self) -> float:
        """Normalized fading rate ``2 pi fd ts``."""
        return 2.0 * math.pi * self.fd * self.ts

    @classmethod
    def from_a1(cls, a1: float, ts: float = 1.0 / 150) -> "Ar1Params":
        if not 0.0 <= a1 <= 1.0:
            raise DomainError(f"a1 must lie in [0, 1], got {a1}")
        fd = math.inf if a1 == 0.0 else -math.log(a1) / (2.0 * math.pi * ts)
        return cls(fd=fd, ts=ts)


@dataclass(frozen=True)
class ChannelTrace:
    gains: np.ndarray
    slot: float
    seed: int

    def __post_init__(self):
        g = np.asarray(self.gains, dtype=np.float64)
        if g.ndim != 1 or g.size == 0:
            raise DomainError("ChannelTrace.gains must be a non-empty 1-D sequence")
        if not np.all(g > 0):
            raise DomainError("ChannelTrace.gains must be strictly positive")
        g.setflags(write=False)
        object.__setattr__(self, "gains", g)

    def __len__(self):
        return self.gains.size

    @property
    def log_gains(self) -> np.ndarray:
        return np.log(self.gains)


@dataclass(frozen=True)
class QuantizedChain:
    """K channel levels with a row-stochastic one-step transition matrix."""

    levels: np.ndarray
    trans: np.ndarray
    edges: np.ndarray = field(repr=False)

    @property
    def k(self) -> int:
        return self.levels.size

    def cell_of(self, gains) -> np.ndarray:
        """Index of the quantile cell holding each gain."""
        return np.searchsorted(self.edges, np.log(np.asarray(gains)), side="right") - 1


def lognormal_pdf(h, p: LognormalParams):
    """Log-normal density of the channel gain."""
    h_arr = np.asarray(h, dtype=np.float64)
    if np.any(h_arr <= 0):
        raise DomainError("lognormal_pdf requires h > 0")
    z = (np.log(h_arr) - p.m) / p.sigma
    out = np.exp(-0.5 * z * z) / (h_arr * p.sigma * math.sqrt(2.0 * math.pi))
    return float(out) if out.ndim == 0 else out


def lognormal_moments(p: LognormalParams) -> tuple[float, float]:
    """Mean and variance of ``h = exp(N(m, sigma^2))``."""
    s2 = p.sigma * p.sigma
    mean = math.exp(p.m + 0.5 * s2)
    var = math.exp(2.0 * p.m + s2) * math.expm1(s2)
    return mean, var


def _innovation_std(p: LognormalParams, a1: float) -> float:
    return p.sigma * math.sqrt(max(0.0, 1.0 - a1 * a1))


def gen_ar1_trace(p: LognormalParams, a: Ar1Params, n_slots: int, seed: int) -> ChannelTrace:
    """Generate ``n_slots`` stationary AR(1) log-normal gains.

    Bit-for-bit reproducible for a given ``(p, a, n_slots, seed)``.
    """
    if n_slots < 1:
        raise DomainError(f"n_slots must be >= 1, got {n_slots}")
    rng = np.random.Generator(np.random.PCG64(seed))
    z = rng.standard_normal(n_slots)
    a1 = a.a1
    x = kernels.ar1_log(z, p.m, p.sigma, a1, _innovation_std(p, a1))
    return ChannelTrace(gains=np.exp(x), slot=a.ts, seed=seed)


def estimate_a1(trace) -> float:
    """Yule-Walker AR(1) coefficient of the log-gains: R(1) / R(0).

    Accepts a :class:`ChannelTrace` or a raw sequence of positive gains.
    """
    gains = trace.gains if isinstance(trace, ChannelTrace) else np.asarray(trace, dtype=np.float64)
    if gains.size < 2:
        raise DomainError("estimate_a1 needs at least 2 slots")
    x = np.log(gains)
    if np.all(x == x[0]):
        raise DegenerateInputError("log-gain trace has zero variance")
    x = x - x.mean()
    r0 = float(np.dot(x, x))
    r1 = float(np.dot(x[1:], x[:-1]))
    return r1 / r0


def psd_ar1(f, a: Ar1Params, p: LognormalParams, mode: str = "rational"):
    """AR(1) power spectral density.

    ``mode="rational"`` evaluates ``sigma^2 / |1 + a1 e^{-j 2 pi f}|^2`` at
    normalized frequency ``f`` (cycles/slot) exactly as written, which puts the
    spectral minimum at DC. ``mode="lorentzian"`` evaluates the Doppler form
    ``(sigma^2 / (pi fd)) / (1 + (f / fd)^2)`` with ``f`` in Hz.
    """
    f = np.asarray(f, dtype=np.float64)
    s2 = p.sigma * p.sigma
    if mode == "rational":
        denom = np.abs(1.0 + a.a1 * np.exp(-2j * np.pi * f)) ** 2
        out = s2 / denom
    elif mode == "lorentzian":
        if not (a.fd > 0 and math.isfinite(a.fd)):
            raise DomainError("lorentzian PSD needs a finite fd > 0")
        out = (s2 / (math.pi * a.fd)) / (1.0 + (f / a.fd) ** 2)
    else:
        raise DomainError(f"unknown PSD mode {mode!r}")
    return float(out) if out.ndim == 0 else out


def quantize_chain(p: LognormalParams, a: Ar1Params, k: int) -> QuantizedChain:
    """Equiprobable K-level Markov approximation of the AR(1) kernel.

    Cell ``i`` holds the log-gains between the ``i/K`` and ``(i+1)/K``
    quantiles and is represented by its median. The transition probability is
    the exact stationary one, ``P(X' in cell l | X in cell i)``, i.e. the
    conditional normal averaged over the whole source cell.
    """
    if k < 2:
        raise DomainError(f"K must be >= 2, got {k}")
    a1 = a.a1
    probs = np.arange(k + 1) / k
    edges = p.m + p.sigma * ndtri(probs)  # -inf ... +inf
    mids = p.m + p.sigma * ndtri((2 * np.arange(1, k + 1) - 1) / (2.0 * k))
    sd = _innovation_std(p, a1)
    if sd == 0.0:
        trans = np.eye(k)
    else:
        std_edges = ndtri(probs)  # standardized cell edges

        def row(u):
            # u is the source quantile; t its standardized log-gain
            t = ndtri(u)
            return np.diff(ndtr((std_edges - a1 * t) / math.sqrt(1.0 - a1 * a1)))

        trans = np.empty((k, k))
        for i in range(k):
            val, _ = integrate.quad_vec(row, probs[i], probs[i + 1], epsabs=1e-13, epsrel=1e-11)
            trans[i] = val * k
        trans = np.clip(trans, 0.0, 1.0)
        trans /= trans.sum(axis=1, keepdims=True)
    return QuantizedChain(levels=np.exp(mids), trans=trans, edges=edges)


def stationary_distribution(trans: np.ndarray) -> np.ndarray:
    """Left Perron eigenvector of a row-stochastic matrix, normalized to sum 1."""
    w, v = np.linalg.eig(trans.T)
    idx = int(np.argmin(np.abs(w - 1.0)))
    pi = np.real(v[:, idx])
    return pi / pi.sum()
