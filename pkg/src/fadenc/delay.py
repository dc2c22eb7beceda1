"""Expected time to deliver uncoded packets over a time-varying erasure channel.

Every transmission attempt consumes one slot and moves the channel one step
forward, so a retransmission never sees the channel state of the attempt it
repeats. With ``pe_j`` the erasure probability of slot ``j``::

    T(i, j) = Tp + (1 - pe_j) T(i - 1, j + 1) + pe_j T(i, j + 1),  T(0, .) = 0

Past the end of a finite profile the channel is summarized by its stationary
mean erasure ``tail`` and ``T(i) = i Tp / (1 - tail)``.
"""

from dataclasses import dataclass, field
import csv
import io
import math
from typing import Optional

import numpy as np
from scipy import integrate
from scipy.special import ndtr

from .channel import ChannelTrace, LognormalParams, QuantizedChain
from .errors import ConvergenceError, DomainError
from .link import (
    LinkBudget,
    PowerPolicy,
    ber_adaptive,
    ber_fixed,
    effective_power,
    packet_erasure,
)

__all__ = [
    "ErasureProfile",
    "DelayTable",
    "transition_probs",
    "expected_time_uncoded",
    "expected_time_chain",
    "erasure_profile_from_trace",
    "erasure_from_gain",
    "stationary_erasure",
]

TAIL_CLAMP = 1.0 - 1e-9


@dataclass(frozen=True)
class ErasureProfile:
    """Per-slot erasure probabilities plus the stationary tail beyond them.

    ``power`` holds per-slot transmit power relative to the nominal power
    (1 for fixed power, ``h_out / h`` under inversion, 0 in outage); it only
    matters for energy accounting.
    """

    pe: np.ndarray
    tail: float
    power: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        pe = np.atleast_1d(np.array(self.pe, dtype=np.float64))
        if pe.ndim != 1 or pe.size == 0:
            raise DomainError("ErasureProfile.pe must be a non-empty 1-D sequence")
        if np.any(~((pe >= 0) & (pe <= 1))):
            raise DomainError("ErasureProfile.pe entries must lie in [0, 1]")
        if not 0.0 <= self.tail < 1.0:
            raise DomainError(f"ErasureProfile.tail must lie in [0, 1), got {self.tail}")
        pe.setflags(write=False)
        object.__setattr__(self, "pe", pe)
        if self.power is None:
            w = np.ones_like(pe)
        else:
            w = np.array(self.power, dtype=np.float64)
            if w.shape != pe.shape or np.any(w < 0):
                raise DomainError("ErasureProfile.power must match pe and be >= 0")
        w.setflags(write=False)
        object.__setattr__(self, "power", w)

    @classmethod
    def constant(cls, pe: float, length: int = 1) -> "ErasureProfile":
        return cls(np.full(length, pe), pe)

    def __len__(self):
        return self.pe.size

    @property
    def tail_power(self) -> float:
        return float(self.power.mean())

    def padded(self, total: int) -> tuple[np.ndarray, np.ndarray]:
        """``(pe, power)`` extended with tail values to ``total`` slots."""
        n = self.pe.size
        pe = np.full(max(total, n), self.tail)
        pe[:n] = self.pe
        w = np.full(max(total, n), self.tail_power)
        w[:n] = self.power
        return pe, w


@dataclass(frozen=True)
class DelayTable:
    """Expected delivery times ``t[i, j]`` (seconds) for i = 0..N packets
    starting at slot j; ``tail[i]`` is the value past the profile end."""

    t: np.ndarray
    tp: float
    tail: np.ndarray

    @property
    def n_packets(self) -> int:
        return self.t.shape[0] - 1

    def __getitem__(self, idx):
        return self.t[idx]

    def to_csv(self, fh=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["i", "j", "seconds"])
        for i in range(self.t.shape[0]):
            for j in range(self.t.shape[1]):
                writer.writerow([i, j, f"{self.t[i, j]:.11e}"])
        text = buf.getvalue()
        if fh is not None:
            fh.write(text)
        return text

    @classmethod
    def from_csv(cls, text: str, tp: float) -> "DelayTable":
        rows = list(csv.DictReader(io.StringIO(text)))
        n_i = max(int(r["i"]) for r in rows) + 1
        n_j = max(int(r["j"]) for r in rows) + 1
        t = np.zeros((n_i, n_j))
        for r in rows:
            t[int(r["i"]), int(r["j"])] = float(r["seconds"])
        return cls(t, tp, np.full(n_i, np.nan))


def transition_probs(pe: float) -> tuple[float, float]:
    """Success and failure probabilities of one attempt with erasure ``pe``."""
    if not 0.0 <= pe <= 1.0:
        raise DomainError(f"erasure probability must lie in [0, 1], got {pe}")
    return 1.0 - pe, pe


def expected_time_uncoded(profile: ErasureProfile, n_packets: int, tp: float) -> DelayTable:
    if n_packets < 0:
        raise DomainError("number of packets must be >= 0")
    if not tp > 0:
        raise DomainError("packet duration must be > 0")
    if profile.tail >= 1.0:
        raise ConvergenceError("tail erasure of 1 makes delivery time infinite")
    n = len(profile)
    i = np.arange(n_packets + 1, dtype=np.float64)
    tail = i * tp / (1.0 - profile.tail)
    t = np.empty((n_packets + 1, n))
    nxt = tail
    for j in range(n - 1, -1, -1):
        pe = profile.pe[j]
        col = np.empty(n_packets + 1)
        col[0] = 0.0
        col[1:] = tp + (1.0 - pe) * nxt[:-1] + pe * nxt[1:]
        t[:, j] = col
        nxt = col
    return DelayTable(t, tp, tail)


def expected_time_chain(chain: QuantizedChain, pe_levels, n_packets: int, tp: float) -> np.ndarray:
    """Expected delivery times over a quantized channel chain.

    Returns an ``(N + 1, K)`` array indexed by packets and starting level.
    """
    pe = np.asarray(pe_levels, dtype=np.float64)
    if pe.shape != (chain.k,):
        raise DomainError("need one erasure probability per chain level")
    if np.any(~((pe >= 0) & (pe <= 1))):
        raise DomainError("erasure probabilities must lie in [0, 1]")
    k = chain.k
    a = np.eye(k) - pe[:, None] * chain.trans
    if abs(np.linalg.det(a)) < 1e-14:
        raise ConvergenceError("chain can stay erased forever")
    out = np.zeros((n_packets + 1, k))
    ok = (1.0 - pe)[:, None] * chain.trans
    for i in range(1, n_packets + 1):
        out[i] = np.linalg.solve(a, tp + ok @ out[i - 1])
    return out


def erasure_from_gain(h, budget: LinkBudget, policy: PowerPolicy, p: LognormalParams, orientation: str = "literal"):
    """Per-slot ``(pe, relative power)`` for gains ``h`` under ``policy``."""
    h = np.atleast_1d(np.asarray(h, dtype=np.float64))
    if policy.is_adaptive:
        power = np.atleast_1d(effective_power(h, policy))
        pe_on = packet_erasure(ber_adaptive(policy, budget, p), budget.bits)
        pe = np.where(power > 0, pe_on, 1.0)
        return pe, power / policy.pt
    pe = np.atleast_1d(packet_erasure(ber_fixed(h, budget, p, orientation), budget.bits))
    return pe, np.ones_like(pe)


def erasure_profile_from_trace(
    trace: ChannelTrace,
    budget: LinkBudget,
    policy: PowerPolicy,
    p: LognormalParams,
    orientation: str = "literal",
) -> ErasureProfile:
    pe, power = erasure_from_gain(trace.gains, budget, policy, p, orientation)
    tail = min(float(pe.mean()), TAIL_CLAMP)
    return ErasureProfile(pe, tail, power)


def stationary_erasure(budget: LinkBudget, policy: PowerPolicy, p: LognormalParams, orientation: str = "literal") -> float:
    """Mean packet erasure under the log-normal marginal of the channel."""
    if policy.is_adaptive:
        pe_on = packet_erasure(ber_adaptive(policy, budget, p), budget.bits)
        # outage when h < pt h_out / pt_max
        cut = policy.cutoff_gain
        p_outage = 0.0 if cut <= 0 else float(ndtr((math.log(cut) - p.m) / p.sigma))
        return p_outage + (1.0 - p_outage) * pe_on

    def f(z):
        h = math.exp(p.m + p.sigma * z)
        pe = packet_erasure(ber_fixed(h, budget, p, orientation), budget.bits)
        return pe * math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)

    # the normal weight is below 1e-300 outside |z| < 38
    val = integrate.quad(f, -38.0, 38.0, epsabs=1e-13, epsrel=1e-10, limit=400, points=[0.0])[0]
    return min(max(val, 0.0), 1.0)

