"""Bit/packet error, outage, and power-policy computations.

Includes the scalar Gaussian Q-function, its bivariate form by deterministic
quadrature, and a seeded Monte Carlo estimator of the k-dimensional orthant
probability used for correlated coded-packet bounds.
"""

from dataclasses import dataclass
import math
from typing import NamedTuple, Optional

import numpy as np
from scipy import integrate
from scipy.special import erfc, ndtri

from .channel import LognormalParams
from .errors import DomainError

__all__ = [
    "PowerPolicy",
    "LinkBudget",
    "CorrelationMatrix",
    "McEstimate",
    "q_function",
    "q_inverse",
    "ber_fixed",
    "ber_adaptive",
    "packet_erasure",
    "outage_threshold",
    "effective_power",
    "q2",
    "qn",
    "ber_correlated",
    "joint_lognormal_density",
    "sample_lognormal_sum",
]

FIXED = "fixed"
ADAPTIVE = "adaptive"


def q_function(x):
    """Standard normal upper-tail probability ``Q(x) = erfc(x / sqrt 2) / 2``."""
    out = 0.5 * erfc(np.asarray(x, dtype=np.float64) / math.sqrt(2.0))
    return float(out) if np.ndim(out) == 0 else out


def q_inverse(p):
    """Inverse of :func:`q_function` on (0, 1)."""
    p_arr = np.asarray(p, dtype=np.float64)
    if np.any(~((p_arr > 0) & (p_arr < 1))):
        raise DomainError("q_inverse requires 0 < p < 1")
    out = -ndtri(p_arr)
    return float(out) if out.ndim == 0 else out


def outage_threshold(p_out: float, p: LognormalParams) -> float:
    """Channel gain ``h_out`` with ``P_out = Q((m - ln h_out) / sigma)``."""
    if not 0.0 < p_out < 1.0:
        raise DomainError(f"p_out must lie in (0, 1), got {p_out}")
    return math.exp(p.m - p.sigma * q_inverse(p_out))


@dataclass(frozen=True)
class PowerPolicy:
    """Fixed transmit power, or channel inversion with an outage cutoff.

    Build adaptive policies with :meth:`adaptive_for` so ``h_out`` is derived
    from the target outage probability.
    """

    variant: str
    pt: float
    pt_max: float = math.inf
    p_out: Optional[float] = None
    h_out: Optional[float] = None
    channel: Optional[LognormalParams] = None

    def __post_init__(self):
        if self.variant not in (FIXED, ADAPTIVE):
            raise DomainError(f"PowerPolicy.variant must be fixed|adaptive, got {self.variant!r}")
        if not self.pt > 0:
            raise DomainError(f"PowerPolicy.pt must be > 0, got {self.pt}")
        if self.variant == ADAPTIVE:
            if not self.pt_max >= self.pt:
                raise DomainError(f"PowerPolicy.pt_max ({self.pt_max}) must be >= pt ({self.pt})")
            if self.p_out is None or not 0.0 < self.p_out < 1.0:
                raise DomainError(f"PowerPolicy.p_out must lie in (0, 1), got {self.p_out}")
            if self.h_out is None or not self.h_out > 0:
                raise DomainError("PowerPolicy.h_out must be > 0")
            if self.channel is not None:
                want = outage_threshold(self.p_out, self.channel)
                if not math.isclose(self.h_out, want, rel_tol=1e-12):
                    raise DomainError("PowerPolicy.h_out inconsistent with p_out and channel")

    @classmethod
    def fixed(cls, pt: float = 1.0) -> "PowerPolicy":
        return cls(FIXED, pt)

    @classmethod
    def adaptive_for(cls, pt: float, pt_max: float, p_out: float, channel: LognormalParams) -> "PowerPolicy":
        return cls(ADAPTIVE, pt, pt_max, p_out, outage_threshold(p_out, channel), channel)

    @property
    def is_adaptive(self) -> bool:
        return self.variant == ADAPTIVE

    @property
    def cutoff_gain(self) -> float:
        """Gains below this put the adaptive policy in outage (0 for fixed)."""
        if not self.is_adaptive:
            return 0.0
        return self.pt * self.h_out / self.pt_max


@dataclass(frozen=True)
class LinkBudget:
    """Noise density ``n0`` (W/Hz), bit rate ``rate``, packet bits, nominal SNR."""

    n0: float
    rate: float
    bits: int
    snr: float

    def __post_init__(self):
        for name in ("n0", "rate", "snr"):
            if not getattr(self, name) > 0:
                raise DomainError(f"LinkBudget.{name} must be > 0")
        if int(self.bits) != self.bits or self.bits < 1:
            raise DomainError(f"LinkBudget.bits must be a positive integer, got {self.bits}")

    @classmethod
    def from_snr_db(cls, snr_db: float, pt: float = 1.0, bits: int = 8, tp: float = 1.0 / 150) -> "LinkBudget":
        """Budget whose noise density makes ``pt / (n0 rate)`` equal the SNR.

        The bit rate is ``bits / tp`` so one packet fills one slot.
        """
        snr = 10.0 ** (snr_db / 10.0)
        rate = bits / tp
        return cls(n0=pt / (rate * snr), rate=rate, bits=bits, snr=snr)

    def consistent_with(self, policy: PowerPolicy, rel_tol: float = 1e-9) -> bool:
        return math.isclose(self.snr, policy.pt / (self.n0 * self.rate), rel_tol=rel_tol)


def _check_gain(h):
    h_arr = np.asarray(h, dtype=np.float64)
    if np.any(~(h_arr > 0)):
        raise DomainError("channel gain must be > 0")
    return h_arr


def ber_fixed(h, budget: LinkBudget, p: LognormalParams, orientation: str = "literal"):
    """Bit error bound under fixed power.

    ``orientation="literal"`` evaluates ``Q((m - ln(h / SNR)) / sigma)`` as
    printed; this decreases with SNR and increases with h. ``"product"``
    evaluates ``Q((m - ln(h SNR)) / sigma)``, the other grouping of the
    logarithm, which increases with both h and SNR.
    """
    h_arr = _check_gain(h)
    if not budget.snr > 0:
        raise DomainError("snr must be > 0")
    if orientation == "literal":
        arg = (p.m - (np.log(h_arr) - math.log(budget.snr))) / p.sigma
    elif orientation == "product":
        arg = (p.m - (np.log(h_arr) + math.log(budget.snr))) / p.sigma
    else:
        raise DomainError(f"unknown orientation {orientation!r}")
    return q_function(arg)


def ber_adaptive(policy: PowerPolicy, budget: LinkBudget, p: LognormalParams) -> float:
    """Channel-independent bit error bound of the inversion policy (not in outage)."""
    if not policy.is_adaptive:
        raise TypeError("ber_adaptive requires an adaptive PowerPolicy")
    ratio = policy.h_out * budget.n0 * budget.rate / policy.pt
    return q_function((p.m - math.log(ratio)) / p.sigma)


def packet_erasure(pb, bits):
    """``1 - (1 - pb)^B`` computed without cancellation for small ``pb``."""
    pb_arr = np.asarray(pb, dtype=np.float64)
    if np.any(~((pb_arr >= 0) & (pb_arr <= 1))):
        raise DomainError("bit error probability must lie in [0, 1]")
    if np.any(np.asarray(bits) < 1):
        raise DomainError("bits per packet must be >= 1")
    with np.errstate(divide="ignore"):
        out = -np.expm1(np.asarray(bits, dtype=np.float64) * np.log1p(-pb_arr))
    out = np.where(pb_arr >= 1.0, 1.0, out)
    return float(out) if out.ndim == 0 else out


def effective_power(h, policy: PowerPolicy):
    """Transmit power at gain ``h``; 0 when the adaptive policy is in outage."""
    h_arr = _check_gain(h)
    if not policy.is_adaptive:
        out = np.full_like(h_arr, policy.pt)
    else:
        req = policy.pt * policy.h_out / h_arr
        out = np.where(req <= policy.pt_max, req, 0.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class CorrelationMatrix:
    entries: np.ndarray

    def __post_init__(self):
        c = np.array(self.entries, dtype=np.float64)
        if c.ndim != 2 or c.shape[0] != c.shape[1] or c.shape[0] < 1:
            raise DomainError("correlation matrix must be square and non-empty")
        if not np.allclose(c, c.T, rtol=0, atol=1e-12):
            raise DomainError("correlation matrix must be symmetric")
        if not np.allclose(np.diag(c), 1.0, rtol=0, atol=1e-12):
            raise DomainError("correlation matrix must have unit diagonal")
        if np.any(np.abs(c) > 1.0 + 1e-12):
            raise DomainError("correlations must lie in [-1, 1]")
        if np.linalg.eigvalsh(c).min() < -1e-10:
            raise DomainError("correlation matrix must be positive semi-definite")
        c.setflags(write=False)
        object.__setattr__(self, "entries", c)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def equicorrelated(cls, k: int, rho: float) -> "CorrelationMatrix":
        c = np.full((k, k), rho, dtype=np.float64)
        np.fill_diagonal(c, 1.0)
        return cls(c)

    def factor(self) -> np.ndarray:
        """``L`` with ``L L^T = C``, valid for singular PSD matrices too."""
        w, v = np.linalg.eigh(self.entries)
        return v * np.sqrt(np.clip(w, 0.0, None))


class McEstimate(NamedTuple):
    value: float
    stderr: float
    samples: int


def q2(x1: float, x2: float, rho: float) -> float:
    """Bivariate upper-orthant probability ``P(U > x1, V > x2)``, corr ``rho``.

    The inner integral of the bivariate normal density is done in closed form
    (a conditional normal tail) and the outer one by adaptive quadrature.
    """
    if not -1.0 < rho < 1.0:
        raise DomainError(f"|rho| must be < 1, got {rho}")
    if rho == 0.0:
        return q_function(x1) * q_function(x2)
    s = math.sqrt(1.0 - rho * rho)

    def integrand(t):
        return math.exp(-0.5 * t * t) / math.sqrt(2.0 * math.pi) * 0.5 * math.erfc((x2 - rho * t) / (s * math.sqrt(2.0)))

    total = integrate.quad(integrand, x1, math.inf, epsabs=1e-13, epsrel=1e-11, limit=200)[0]
    return min(1.0, max(0.0, total))


def qn(x, c: CorrelationMatrix, samples: int = 1_000_000, seed: int = 0) -> McEstimate:
    """k-dimensional Gaussian orthant probability ``P(Z > x)`` by Monte Carlo."""
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if not isinstance(c, CorrelationMatrix):
        c = CorrelationMatrix(c)
    if x.ndim != 1 or x.size != c.dim:
        raise DomainError(f"dimension mismatch: x has {x.size} entries, C is {c.dim}x{c.dim}")
    if samples < 2:
        raise DomainError("qn needs at least 2 samples")
    lower = c.factor()
    rng = np.random.Generator(np.random.PCG64(seed))
    hits = 0
    done = 0
    chunk = 1 << 18
    while done < samples:
        n = min(chunk, samples - done)
        z = rng.standard_normal((n, c.dim)) @ lower.T
        hits += int(np.count_nonzero(np.all(z > x, axis=1)))
        done += n
    p_hat = hits / samples
    se = math.sqrt(max(p_hat * (1.0 - p_hat), 0.0) / (samples - 1))
    return McEstimate(p_hat, se, samples)


def _log_args(h, p: LognormalParams):
    h_arr = _check_gain(np.atleast_1d(h))
    return (p.m - np.log(h_arr)) / p.sigma


def ber_correlated(h, c: CorrelationMatrix, p: LognormalParams, samples: int = 1_000_000, seed: int = 0) -> float:
    """Joint bit error bound across k correlated coded-packet channels.

    Exact for k = 1 and k = 2 (scalar and bivariate Q); Monte Carlo for k >= 3.
    """
    if not isinstance(c, CorrelationMatrix):
        c = CorrelationMatrix(c)
    args = _log_args(h, p)
    if args.size != c.dim:
        raise DomainError(f"dimension mismatch: {args.size} gains, C is {c.dim}x{c.dim}")
    if c.dim == 1:
        return q_function(args[0])
    if c.dim == 2:
        return q2(args[0], args[1], float(c.entries[0, 1]))
    return qn(args, c, samples=samples, seed=seed).value


def joint_lognormal_density(h, mu, c: CorrelationMatrix, sigma: float) -> float:
    """Multivariate log-normal density with log-covariance ``sigma^2 C``."""
    if not isinstance(c, CorrelationMatrix):
        c = CorrelationMatrix(c)
    h_arr = np.atleast_1d(np.asarray(h, dtype=np.float64))
    if np.any(~(h_arr > 0)):
        raise DomainError("joint_lognormal_density requires positive gains")
    if h_arr.size != c.dim:
        raise DomainError("dimension mismatch between gains and correlation matrix")
    cov = sigma * sigma * c.entries
    sign, logdet = np.linalg.slogdet(cov)
    if sign <= 0 or not np.isfinite(logdet):
        raise DomainError("correlation matrix is singular")
    d = np.log(h_arr) - np.broadcast_to(np.asarray(mu, dtype=np.float64), h_arr.shape)
    quad = float(d @ np.linalg.solve(cov, d))
    k = h_arr.size
    log_pdf = -0.5 * (k * math.log(2.0 * math.pi) + logdet + quad) - float(np.sum(np.log(h_arr)))
    return math.exp(log_pdf)


def sample_lognormal_sum(n: int, mu, c: CorrelationMatrix, sigma: float, seed: int = 0) -> np.ndarray:
    """Draws of ``sum_i h_i`` for correlated log-normal components.

    The sum has no closed-form density; use these samples as its reference.
    """
    if not isinstance(c, CorrelationMatrix):
        c = CorrelationMatrix(c)
    rng = np.random.Generator(np.random.PCG64(seed))
    logs = np.asarray(mu, dtype=np.float64) + sigma * (rng.standard_normal((n, c.dim)) @ c.factor().T)
    return np.exp(logs).sum(axis=1)

