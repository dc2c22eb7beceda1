"""Coded-round delivery model: time, energy, and their optimizers.

A super-state is (dof still needed, slot). From ``(i, j)`` the sender emits
``ni`` coded packets in slots ``j .. j + ni - 1`` and then waits one
acknowledgment slot, so the next super-state starts at ``j + ni + 1``::

    T(i, j) = (ni + 1) Tp + sum_l P(i -> l | pe_j .. pe_{j+ni-1}) T(l, j + ni + 1)

Any ``i`` received coded packets decode the block, so the number of remaining
dof is ``max(i - S, 0)`` with ``S`` the Poisson-binomial success count of the
round. Past the end of the erasure profile the channel is stationary and each
dof level is solved in closed form.
"""

from dataclasses import dataclass
import csv
import io
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .delay import ErasureProfile
from .errors import ConvergenceError, DomainError

__all__ = [
    "CodedConfig",
    "DofDistribution",
    "CodedPlan",
    "round_success_distribution",
    "expected_time_coded",
    "energy_coded",
    "optimize_ni",
    "optimize_energy",
]

_STALL = 1e-15


@dataclass(frozen=True)
class CodedConfig:
    """``n_data`` information packets, ``ni`` coded packets per round."""

    n_data: int
    ni: int
    tp: float
    ni_max: Optional[int] = None

    def __post_init__(self):
        if self.n_data < 1:
            raise DomainError("CodedConfig.n_data must be >= 1")
        if self.ni < 1:
            raise DomainError("CodedConfig.ni must be >= 1")
        if not self.tp > 0:
            raise DomainError("CodedConfig.tp must be > 0")
        if self.ni_max is None:
            object.__setattr__(self, "ni_max", max(self.ni, self.n_data))
        elif self.ni_max < self.ni:
            raise DomainError("CodedConfig.ni_max must be >= ni")

    @property
    def round_slots(self) -> int:
        """Slots per round including the acknowledgment."""
        return self.ni + 1


@dataclass(frozen=True)
class DofDistribution:
    """``probs[l]``: probability that ``l`` dof remain after one round."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise DomainError("DofDistribution must be a probability vector")
        object.__setattr__(self, "probs", p)

    def __getitem__(self, l):
        return self.probs[l]

    def __len__(self):
        return self.probs.size


def _success_counts(pe_slice, i):
    dist = np.zeros(i + 1)
    dist[0] = 1.0
    for pe in pe_slice:
        q = 1.0 - pe
        new = dist * pe
        new[1:] += dist[:-1] * q
        new[i] += dist[i] * q
        dist = new
    return dist


def round_success_distribution(pe_slice, i: int) -> DofDistribution:
    """Distribution of remaining dof after transmitting over ``pe_slice``."""
    if i < 1:
        raise DomainError("dof needed must be >= 1")
    pe_slice = np.asarray(pe_slice, dtype=np.float64)
    if np.any(~((pe_slice >= 0) & (pe_slice <= 1))):
        raise DomainError("erasure probabilities must lie in [0, 1]")
    return DofDistribution(_success_counts(pe_slice, i)[::-1].copy())


def _success_counts_all(pe_pad, n, i, ni_max):
    """Remaining-dof distributions for every start slot and round size.

    Returns ``out[ni]`` of shape ``(n, i + 1)`` indexed by ``(start, l)``.
    """
    dist = np.zeros((n, i + 1))
    dist[:, 0] = 1.0
    out = {}
    for t in range(ni_max):
        pe = pe_pad[t:t + n, None]
        q = 1.0 - pe
        new = dist * pe
        new[:, 1:] += dist[:, :-1] * q
        new[:, i] += dist[:, i] * q[:, 0]
        dist = new
        out[t + 1] = dist[:, ::-1]
    return out


@dataclass
class _Solution:
    seconds: np.ndarray
    joules: np.ndarray
    ni: np.ndarray
    power: np.ndarray
    n: int

    def col(self, j0):
        return min(j0, self.n)


def _solve(profiles, n_data, tp, candidates: Callable[[int], Sequence[tuple]], objective):
    n = len(profiles[0])
    if any(len(p) != n for p in profiles):
        raise DomainError("all erasure profiles must have the same length")
    ni_top = max(c[1] for i in range(1, n_data + 1) for c in candidates(i))
    width = n + ni_top + 2
    pads = [p.padded(width + ni_top) for p in profiles]
    cum_w = [np.concatenate(([0.0], np.cumsum(w))) for _, w in pads]

    T = np.zeros((n_data + 1, width))
    E = np.zeros((n_data + 1, width))
    NI = np.zeros((n_data + 1, width), dtype=np.int64)
    PW = np.zeros((n_data + 1, width))

    # stationary region: columns n .. width-1 all hold the tail value
    for i in range(1, n_data + 1):
        best = None
        for k, ni, pw in candidates(i):
            prof = profiles[k]
            probs = _success_counts(np.full(ni, prof.tail), i)[::-1]
            move = 1.0 - probs[i]
            if move <= _STALL:
                continue
            t = ((ni + 1) * tp + probs[:i] @ T[:i, n]) / move
            e = (pw * tp * ni * prof.tail_power + probs[:i] @ E[:i, n]) / move
            score = t if objective == "time" else e
            if best is None or score < best[0]:
                best = (score, t, e, ni, pw)
        if best is None:
            raise ConvergenceError(f"no round size makes progress from {i} dof on the stationary channel")
        _, T[i, n:], E[i, n:], NI[i, n:], PW[i, n:] = best

    if n == 0:
        return _Solution(T, E, NI, PW, n)
    for i in range(1, n_data + 1):
        cands = list(candidates(i))
        by_profile = {}
        for k, ni, _ in cands:
            by_profile.setdefault(k, 0)
            by_profile[k] = max(by_profile[k], ni)
        dists = {k: _success_counts_all(pads[k][0], n, i, m) for k, m in by_profile.items()}
        c_t = np.empty((len(cands), n))
        c_e = np.empty((len(cands), n))
        stay = np.empty((len(cands), n))
        ni_vec = np.empty(len(cands), dtype=np.int64)
        pw_vec = np.empty(len(cands))
        for c, (k, ni, pw) in enumerate(cands):
            P = dists[k][ni]
            nxt = slice(ni + 1, ni + 1 + n)
            c_t[c] = (ni + 1) * tp + np.einsum("jl,lj->j", P[:, :i], T[:i, nxt])
            sent = cum_w[k][ni:ni + n] - cum_w[k][:n]
            c_e[c] = pw * tp * sent + np.einsum("jl,lj->j", P[:, :i], E[:i, nxt])
            stay[c] = P[:, i]
            ni_vec[c] = ni
            pw_vec[c] = pw
        Ti = T[i]
        Ei = E[i]
        score_t = objective == "time"
        for j in range(n - 1, -1, -1):
            nj = j + ni_vec + 1
            tv = c_t[:, j] + stay[:, j] * Ti[nj]
            ev = c_e[:, j] + stay[:, j] * Ei[nj]
            c = int(np.argmin(tv if score_t else ev))
            Ti[j] = tv[c]
            Ei[j] = ev[c]
            NI[i, j] = ni_vec[c]
            PW[i, j] = pw_vec[c]
    return _Solution(T, E, NI, PW, n)


def _schedule(config: CodedConfig, schedule) -> list:
    if schedule is None:
        return [config.ni] * (config.n_data + 1)
    sched = list(schedule)
    if len(sched) < config.n_data + 1:
        raise DomainError("schedule must give ni for every dof level 0..n_data")
    if any(int(s) < 1 for s in sched[1:config.n_data + 1]):
        raise DomainError("every scheduled ni must be >= 1")
    return [int(s) for s in sched]


def _powers(powers, n_data) -> list:
    if np.ndim(powers) == 0:
        p = [float(powers)] * (n_data + 1)
    else:
        p = [float(v) for v in powers]
        if len(p) < n_data + 1:
            raise DomainError("powers must give a value for every dof level 0..n_data")
    if any(v < 0 for v in p[1:n_data + 1]):
        raise DomainError("transmit powers must be >= 0")
    return p


def expected_time_coded(profile: ErasureProfile, config: CodedConfig, j0: int = 0, schedule=None) -> float:
    """Expected seconds to deliver ``config.n_data`` dof starting at slot ``j0``.

    ``schedule[i]`` overrides the round size used with ``i`` dof remaining;
    by default every round sends ``config.ni`` coded packets.
    """
    sched = _schedule(config, schedule)
    sol = _solve([profile], config.n_data, config.tp, lambda i: [(0, sched[i], 1.0)], "time")
    return float(sol.seconds[config.n_data, sol.col(j0)])


def energy_coded(profile: ErasureProfile, config: CodedConfig, powers, j0: int = 0, schedule=None) -> float:
    """Expected transmit energy (J) for the same round structure.

    ``powers`` is one nominal transmit power, or one per dof level. Slot
    energy is ``power * profile.power[j] * Tp``; acknowledgment slots are free.
    """
    sched = _schedule(config, schedule)
    pw = _powers(powers, config.n_data)
    sol = _solve([profile], config.n_data, config.tp, lambda i: [(0, sched[i], pw[i])], "time")
    return float(sol.joules[config.n_data, sol.col(j0)])


@dataclass(frozen=True)
class CodedPlan:
    """Per-dof optimal round sizes and powers at the starting slot."""

    ni_star: np.ndarray
    power: np.ndarray
    seconds: np.ndarray
    joules: np.ndarray
    ni_table: np.ndarray
    power_table: np.ndarray

    @property
    def n_data(self) -> int:
        return self.ni_star.size - 1

    @property
    def expected_seconds(self) -> float:
        return float(self.seconds[-1])

    @property
    def expected_joules(self) -> float:
        return float(self.joules[-1])

    def __iter__(self):
        yield self.ni_star
        yield self.expected_seconds

    def to_csv(self, fh=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["dof", "ni_star", "power", "expected_seconds", "expected_joules"])
        for i in range(1, self.n_data + 1):
            w.writerow([i, int(self.ni_star[i]), f"{self.power[i]:.11e}",
                        f"{self.seconds[i]:.11e}", f"{self.joules[i]:.11e}"])
        text = buf.getvalue()
        if fh is not None:
            fh.write(text)
        return text


def _plan(sol: _Solution, j0: int) -> CodedPlan:
    c = sol.col(j0)
    return CodedPlan(
        ni_star=sol.ni[:, c].copy(),
        power=sol.power[:, c].copy(),
        seconds=sol.seconds[:, c].copy(),
        joules=sol.joules[:, c].copy(),
        ni_table=sol.ni[:, : sol.n + 1].copy(),
        power_table=sol.power[:, : sol.n + 1].copy(),
    )


def _ni_range(i, ni_max):
    return range(min(i, ni_max), ni_max + 1)


def optimize_ni(profile: ErasureProfile, n_data: int, tp: float, ni_max: int, j0: int = 0, power: float = 1.0) -> CodedPlan:
    """Round sizes minimizing expected delivery time, per (dof, slot).

    Searches ``ni`` in ``{i, ..., ni_max}`` (only ``ni_max`` when ``i`` exceeds
    it); ties go to the smaller ``ni``.
    """
    if ni_max < 1:
        raise DomainError("ni_max must be >= 1")
    if n_data < 1:
        raise DomainError("n_data must be >= 1")
    sol = _solve([profile], n_data, tp, lambda i: [(0, ni, power) for ni in _ni_range(i, ni_max)], "time")
    return _plan(sol, j0)


def optimize_energy(
    profile_for_power: Union[Callable[[float], ErasureProfile], dict],
    n_data: int,
    tp: float,
    power_grid: Sequence[float],
    ni_max: int,
    j0: int = 0,
) -> CodedPlan:
    """Joint (power, round size) search minimizing expected transmit energy.

    ``profile_for_power`` maps each grid power to the erasure profile it
    induces. Candidates are visited by ascending power then ascending ``ni``
    and ties keep the first one.
    """
    grid = sorted(float(p) for p in power_grid)
    if not grid or any(p <= 0 for p in grid):
        raise DomainError("power grid must be non-empty and positive")
    if ni_max < 1:
        raise DomainError("ni_max must be >= 1")
    get = profile_for_power.__getitem__ if isinstance(profile_for_power, dict) else profile_for_power
    profiles = [get(p) for p in grid]

    def cands(i):
        return [(k, ni, p) for k, p in enumerate(grid) for ni in _ni_range(i, ni_max)]

    return _plan(_solve(profiles, n_data, tp, cands, "energy"), j0)
