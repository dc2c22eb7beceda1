"""Slot-by-slot Monte Carlo simulation of packet delivery.

Each episode draws its own AR(1) channel and erasure variates from two
independent streams derived from ``(seed, episode index)``, so results do not
depend on execution order and paired comparisons across configurations see
the same channel noise.
"""

from dataclasses import dataclass, field, replace
import csv
import io
import math
from typing import List, Optional, Sequence, Union

import numpy as np

from . import kernels
from ._pykernels import I_ERASED, I_SILENT, I_TX, STATUS_CAPPED, STATUS_DONE
from .channel import Ar1Params, LognormalParams
from .coding import optimize_ni
from .delay import ErasureProfile, stationary_erasure
from .errors import ConvergenceError, DomainError
from .link import LinkBudget, PowerPolicy, ber_adaptive, effective_power, packet_erasure

__all__ = [
    "SimConfig",
    "SimResult",
    "SlotRecord",
    "SweepRow",
    "ResultTable",
    "run_episode",
    "run_episodes",
    "sweep",
    "resolve_schedule",
    "default_ni_max",
    "SWEEP_COLUMNS",
]

UNCODED = "uncoded"
CODED = "coded"
DEFAULT_SLOT_CAP = 10_000_000

SWEEP_COLUMNS = [
    "snr_db", "scheme", "policy", "a1",
    "mean_time", "se_time",
    "mean_throughput", "se_throughput",
    "mean_erasure", "se_erasure",
    "mean_energy", "se_energy",
    "mean_silent", "episodes",
]


@dataclass(frozen=True)
class SimConfig:
    """One experimental configuration.

    ``ni`` is the coded round size: an int, a per-dof sequence (index 0
    unused), or ``"opt"`` to use the delay-optimal schedule for the
    stationary erasure rate. ``erasure`` optionally replaces the channel's
    erasure probability with a constant or a per-slot profile.
    """

    n_data: int
    policy: PowerPolicy
    budget: LinkBudget
    channel: LognormalParams = LognormalParams()
    ar1: Ar1Params = Ar1Params.from_a1(0.0)
    tp: float = 1.0 / 150
    scheme: str = UNCODED
    ni: Union[int, str, Sequence[int]] = "opt"
    ni_max: Optional[int] = None
    block: Optional[int] = None
    episodes: int = 1000
    seed: int = 0
    erasure: Union[None, float, ErasureProfile] = None
    orientation: str = "literal"
    slot_cap: int = DEFAULT_SLOT_CAP

    def __post_init__(self):
        if self.n_data < 1:
            raise DomainError("SimConfig.n_data must be >= 1")
        if self.episodes < 1:
            raise DomainError("SimConfig.episodes must be >= 1")
        if not self.tp > 0:
            raise DomainError("SimConfig.tp must be > 0")
        if self.scheme not in (UNCODED, CODED):
            raise DomainError(f"SimConfig.scheme must be uncoded|coded, got {self.scheme!r}")
        if self.block is not None and self.block < 1:
            raise DomainError("SimConfig.block must be >= 1")
        if isinstance(self.erasure, float) and not 0.0 <= self.erasure <= 1.0:
            raise DomainError("constant erasure must lie in [0, 1]")
        if self.orientation not in ("literal", "product"):
            raise DomainError(f"unknown orientation {self.orientation!r}")
        if self.slot_cap < 1:
            raise DomainError("SimConfig.slot_cap must be >= 1")

    @property
    def block_size(self) -> int:
        return self.block or self.n_data

    @property
    def a1(self) -> float:
        return self.ar1.a1


@dataclass
class SlotRecord:
    slot: int
    log_gain: float
    kind: str  # "ok", "erased", "silent", "ack"
    power: float


@dataclass
class SimResult:
    delivery_time: float
    throughput: float
    erasure_rate: float
    energy: float
    silent_slots: int
    slots: int
    transmissions: int
    erasures: int
    log: Optional[List[SlotRecord]] = field(default=None, repr=False)


def _stationary_pe(config: SimConfig) -> float:
    if isinstance(config.erasure, ErasureProfile):
        return config.erasure.tail
    if config.erasure is not None:
        return float(config.erasure)
    return stationary_erasure(config.budget, config.policy, config.channel, config.orientation)


def default_ni_max(block: int, pe: float) -> int:
    """Round-size search cap used when ``ni_max`` is not given.

    The delay-optimal round size stays below ``block / (1 - pe)``, so twice
    that plus a margin leaves the optimum interior; ``64 * block`` bounds the
    search when erasure is nearly certain.
    """
    wide = math.ceil(2 * block / max(1.0 - pe, 1e-12)) + 4
    return max(4 * block, min(wide, 64 * block))


def resolve_schedule(config: SimConfig) -> np.ndarray:
    """Round size per dof level (index 0 unused) for the coded scheme."""
    k = config.block_size
    sched = np.ones(k + 1, dtype=np.int64)
    if config.scheme == UNCODED:
        return sched
    ni = config.ni
    if isinstance(ni, str):
        if ni != "opt":
            raise DomainError(f"SimConfig.ni must be an int, a sequence, or 'opt', got {ni!r}")
        pe = min(_stationary_pe(config), 1.0 - 1e-9)
        ni_max = config.ni_max or default_ni_max(k, pe)
        plan = optimize_ni(ErasureProfile.constant(pe), k, config.tp, ni_max)
        sched[1:] = plan.ni_star[1:]
    elif np.ndim(ni) == 0:
        if int(ni) < 1:
            raise DomainError("SimConfig.ni must be >= 1")
        sched[1:] = int(ni)
    else:
        vals = [int(v) for v in ni]
        if len(vals) < k + 1 or min(vals[1:k + 1]) < 1:
            raise DomainError("ni schedule needs an entry >= 1 for every dof level 1..block")
        sched[1:] = vals[1:k + 1]
    return sched


def _params(config: SimConfig, sched: np.ndarray):
    p, pol, bud = config.channel, config.policy, config.budget
    a1 = config.a1
    innov = p.sigma * math.sqrt(max(0.0, 1.0 - a1 * a1))
    pe_adapt = 0.0
    h_out = 0.0
    pt_max = math.inf
    if pol.is_adaptive:
        pe_adapt = packet_erasure(ber_adaptive(pol, bud, p), bud.bits)
        h_out = pol.h_out
        pt_max = pol.pt_max
    mode, const_pe, tail = 0, 0.0, 0.0
    profile = np.zeros(0)
    if isinstance(config.erasure, ErasureProfile):
        mode, tail, profile = 2, config.erasure.tail, np.ascontiguousarray(config.erasure.pe)
    elif config.erasure is not None:
        mode, const_pe = 1, float(config.erasure)
    fpar = np.array([p.m, p.sigma, a1, innov, math.log(bud.snr), float(bud.bits), pol.pt,
                     pt_max, h_out, pe_adapt, config.tp, tail, const_pe], dtype=np.float64)
    ipar = np.array([0 if config.scheme == UNCODED else 1, 1 if pol.is_adaptive else 0, mode,
                     config.block_size, 0 if config.orientation == "literal" else 1,
                     config.slot_cap], dtype=np.int64)
    return fpar, ipar, np.ascontiguousarray(sched, dtype=np.int64), profile


def _streams(seed: int, episode_index: int):
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(episode_index,))
    ch, er = ss.spawn(2)
    return np.random.Generator(np.random.PCG64(ch)), np.random.Generator(np.random.PCG64(er))


def _episode(config, episode_index, prepared, log=False, backend=None):
    kern = backend or kernels
    fpar, ipar, sched, profile = prepared
    g_ch, g_er = _streams(config.seed, episode_index)
    p = config.channel
    x0 = p.m + p.sigma * float(g_ch.standard_normal())
    first = min(config.block_size, config.n_data)
    istate = np.array([0, config.n_data, first, 0, sched[first], 0, 0, 0, 0, 0], dtype=np.int64)
    fstate = np.array([x0, 0.0], dtype=np.float64)
    records = [] if log else None
    chunk = 1 if log else min(1 << 16, 4 * config.n_data + 16)
    while True:
        z = g_ch.standard_normal(chunk)
        u = g_er.random(chunk)
        if log:
            before = istate.copy()
            x = float(fstate[0])
        kern.run_block(z, u, istate, fstate, fpar, ipar, sched, profile)
        if log and istate[0] > before[0]:
            if istate[I_SILENT] > before[I_SILENT]:
                kind, pw = "silent", 0.0
            elif istate[I_TX] > before[I_TX]:
                kind = "erased" if istate[I_ERASED] > before[I_ERASED] else "ok"
                pw = float(effective_power(math.exp(x), config.policy))
            else:
                kind, pw = "ack", 0.0
            records.append(SlotRecord(int(before[0]), x, kind, pw))
        status = istate[9]
        if status == STATUS_DONE:
            break
        if status == STATUS_CAPPED:
            raise ConvergenceError(
                f"episode {episode_index} did not deliver {config.n_data} packets within {config.slot_cap} slots"
            )
        if not log:
            chunk = min(chunk * 2, 1 << 16)
    slots = int(istate[0])
    tx = int(istate[I_TX])
    erased = int(istate[I_ERASED])
    t = slots * config.tp
    return SimResult(
        delivery_time=t,
        throughput=config.n_data / t,
        erasure_rate=erased / tx if tx else 0.0,
        energy=float(fstate[1]),
        silent_slots=int(istate[I_SILENT]),
        slots=slots,
        transmissions=tx,
        erasures=erased,
        log=records,
    )


def run_episode(config: SimConfig, episode_index: int, log: bool = False, backend=None) -> SimResult:
    """Simulate one episode; deterministic given ``(config, episode_index)``.

    With ``log=True`` every slot is recorded (slow; meant for audits).
    """
    prepared = _params(config, resolve_schedule(config))
    return _episode(config, episode_index, prepared, log=log, backend=backend)


def run_episodes(config: SimConfig, backend=None) -> List[SimResult]:
    prepared = _params(config, resolve_schedule(config))
    return [_episode(config, k, prepared, backend=backend) for k in range(config.episodes)]


def _mean_se(values):
    a = np.asarray(values, dtype=np.float64)
    if a.size < 2:
        return float(a.mean()), 0.0
    return float(a.mean()), float(a.std(ddof=1) / math.sqrt(a.size))


@dataclass(frozen=True)
class SweepRow:
    snr_db: float
    scheme: str
    policy: str
    a1: float
    mean_time: float
    se_time: float
    mean_throughput: float
    se_throughput: float
    mean_erasure: float
    se_erasure: float
    mean_energy: float
    se_energy: float
    mean_silent: float
    episodes: int

    @classmethod
    def aggregate(cls, config: SimConfig, snr_db: float, results: Sequence[SimResult]) -> "SweepRow":
        mt, st = _mean_se([r.delivery_time for r in results])
        mh, sh = _mean_se([r.throughput for r in results])
        me, se = _mean_se([r.erasure_rate for r in results])
        mj, sj = _mean_se([r.energy for r in results])
        ms, _ = _mean_se([r.silent_slots for r in results])
        return cls(snr_db, config.scheme, config.policy.variant, config.a1,
                   mt, st, mh, sh, me, se, mj, sj, ms, len(results))

    def cells(self) -> list:
        out = []
        for name in SWEEP_COLUMNS:
            v = getattr(self, name)
            if name in ("scheme", "policy", "episodes"):
                out.append(str(v))
            elif name in ("snr_db", "a1"):
                out.append(repr(float(v)))
            else:
                out.append(f"{v:.11e}")
        return out


@dataclass
class ResultTable:
    rows: List[SweepRow]

    def to_csv(self, fh=None, comments: Sequence[str] = ()) -> str:
        buf = io.StringIO()
        for line in comments:
            buf.write(f"# {line}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for r in self.rows:
            w.writerow(r.cells())
        text = buf.getvalue()
        if fh is not None:
            fh.write(text)
        return text

    @classmethod
    def from_csv(cls, text: str) -> "ResultTable":
        lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
        reader = csv.reader(lines)
        header = next(reader)
        if header != SWEEP_COLUMNS:
            raise DomainError(f"unexpected sweep CSV header: {header}")
        rows = []
        for cells in reader:
            if len(cells) != len(SWEEP_COLUMNS):
                raise DomainError(f"row has {len(cells)} columns, expected {len(SWEEP_COLUMNS)}")
            kw = {}
            for name, v in zip(SWEEP_COLUMNS, cells):
                if name in ("scheme", "policy"):
                    kw[name] = v
                elif name == "episodes":
                    kw[name] = int(v)
                else:
                    kw[name] = float(v)
            rows.append(SweepRow(**kw))
        return cls(rows)


def sweep(config: SimConfig, snr_grid_db: Sequence[float], backend=None, progress=None) -> ResultTable:
    """Run every episode at each SNR and aggregate mean and standard error.

    The budget's noise density is rescaled per point so ``pt / (n0 R)``
    equals the requested SNR; everything else in ``config`` is kept.
    """
    grid = list(snr_grid_db)
    if not grid:
        raise DomainError("SNR grid must be non-empty")
    rows = []
    for snr_db in grid:
        budget = LinkBudget.from_snr_db(snr_db, pt=config.policy.pt, bits=config.budget.bits, tp=config.tp)
        cfg = replace(config, budget=budget)
        row = SweepRow.aggregate(cfg, snr_db, run_episodes(cfg, backend=backend))
        rows.append(row)
        if progress is not None:
            progress(row)
    return ResultTable(rows)
