"""Command-line front end: experiment specs, sweeps, analytic companions, plots.

Exit codes: 0 success, 2 validation failure, 3 convergence failure, 4 I/O failure.
"""

import argparse
import csv
import io
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np

from .channel import Ar1Params, LognormalParams, quantize_chain, stationary_distribution
from .coding import optimize_ni
from .delay import ErasureProfile, erasure_from_gain, expected_time_chain, stationary_erasure
from .errors import ConvergenceError, DomainError, ValidationError
from .link import LinkBudget, PowerPolicy, packet_erasure, q2, q_function
from .mcsim import SimConfig, ResultTable, default_ni_max, sweep

EXIT_OK, EXIT_VALIDATION, EXIT_CONVERGENCE, EXIT_IO = 0, 2, 3, 4

EXPERIMENTS = ("fig2", "fig3", "fig4", "custom")

# values every named figure experiment runs with
PINNED = {
    ("link", "tp"): 1.0 / 150,
    ("link", "pt"): 1.0,
    ("channel", "m"): -0.5,
    ("channel", "sigma"): 1.0,
    ("analytic", "rho"): 0.2,
}

DEFAULTS = {
    "channel": {"m": -0.5, "sigma": 1.0},
    "link": {"tp": 1.0 / 150, "pt": 1.0, "bits": 8, "snr_db": [0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0]},
    "policy": {"variant": "fixed"},
    "sim": {"n_data": 10, "episodes": 1000, "seed": 0, "scheme": "uncoded", "orientation": "literal",
            "slot_cap": 10_000_000},
    "coding": {"ni": "opt"},
    "analytic": {"delay": True, "coding": True, "correlated": True, "rho": 0.2, "chain_levels": 16},
}

KNOWN = {
    "channel": {"m", "sigma", "a1", "fd", "ts"},
    "link": {"tp", "pt", "bits", "snr_db"},
    "policy": {"variant", "pt_max", "p_out"},
    "sim": {"n_data", "episodes", "seed", "scheme", "orientation", "slot_cap", "erasure"},
    "coding": {"ni", "ni_max", "block"},
    "analytic": {"delay", "coding", "correlated", "rho", "chain_levels"},
}
TOP_LEVEL = {"experiment", "allow_override", "output"}

# where each raw field is reported in violations
FIELD_NAMES = {
    ("channel", "m"): "LognormalParams.m",
    ("channel", "sigma"): "LognormalParams.sigma",
    ("channel", "a1"): "Ar1Params.a1",
    ("channel", "fd"): "Ar1Params.fd",
    ("channel", "ts"): "Ar1Params.ts",
    ("link", "tp"): "SimConfig.tp",
    ("link", "pt"): "PowerPolicy.pt",
    ("link", "bits"): "LinkBudget.bits",
    ("link", "snr_db"): "ExperimentSpec.snr_db",
    ("policy", "variant"): "PowerPolicy.variant",
    ("policy", "pt_max"): "PowerPolicy.pt_max",
    ("policy", "p_out"): "PowerPolicy.p_out",
    ("sim", "n_data"): "SimConfig.n_data",
    ("sim", "episodes"): "SimConfig.episodes",
    ("sim", "seed"): "SimConfig.seed",
    ("sim", "scheme"): "SimConfig.scheme",
    ("sim", "orientation"): "SimConfig.orientation",
    ("sim", "slot_cap"): "SimConfig.slot_cap",
    ("sim", "erasure"): "SimConfig.erasure",
    ("coding", "ni"): "SimConfig.ni",
    ("coding", "ni_max"): "SimConfig.ni_max",
    ("coding", "block"): "SimConfig.block",
    ("analytic", "delay"): "ExperimentSpec.analytic.delay",
    ("analytic", "coding"): "ExperimentSpec.analytic.coding",
    ("analytic", "correlated"): "ExperimentSpec.analytic.correlated",
    ("analytic", "rho"): "ExperimentSpec.analytic.rho",
    ("analytic", "chain_levels"): "ExperimentSpec.analytic.chain_levels",
}


@dataclass
class Regime:
    label: str
    config: SimConfig


@dataclass
class ExperimentSpec:
    experiment: str
    settings: Dict[str, Dict[str, object]]
    regimes: List[Regime]
    snr_db: List[float]
    output: Optional[str]
    analytic: Dict[str, object] = field(default_factory=dict)

    def comment_lines(self) -> List[str]:
        lines = [f"experiment = {self.experiment}"]
        for sec in sorted(self.settings):
            for key in sorted(self.settings[sec]):
                lines.append(f"{sec}.{key} = {_fmt_setting(self.settings[sec][key])}")
        return lines


def _fmt_setting(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, list):
        return "[" + ", ".join(_fmt_setting(x) for x in v) + "]"
    return str(v)


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def load_raw(path: str) -> dict:
    """Parse a TOML spec. ``OSError`` propagates; syntax errors become
    :class:`ValidationError`."""
    with open(path, "rb") as fh:
        data = fh.read()
    try:
        return tomllib.loads(data.decode("utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ValidationError([f"{path}: cannot parse spec: {exc}"]) from None


def _merged(raw: dict) -> Dict[str, Dict[str, object]]:
    out = {sec: dict(vals) for sec, vals in DEFAULTS.items()}
    for sec in KNOWN:
        out.setdefault(sec, {})
        if isinstance(raw.get(sec), dict):
            out[sec].update(raw[sec])
    return out


def validate_raw(raw: dict) -> List[str]:
    """Every invariant violation in ``raw``; empty when the experiment is usable."""
    v: List[str] = []
    for key in raw:
        if key not in TOP_LEVEL and key not in KNOWN:
            v.append(f"ExperimentSpec: unknown field {key!r}")
        elif key in KNOWN and not isinstance(raw[key], dict):
            v.append(f"ExperimentSpec: [{key}] must be a section")
    exp = raw.get("experiment", "custom")
    if exp not in EXPERIMENTS:
        v.append(f"ExperimentSpec.experiment: must be one of {', '.join(EXPERIMENTS)}, got {exp!r}")
    override = raw.get("allow_override", False)
    if not isinstance(override, bool):
        v.append("ExperimentSpec.allow_override: must be true or false")
        override = False
    if "output" in raw and not isinstance(raw["output"], str):
        v.append("ExperimentSpec.output: must be a path string")
    for sec, vals in raw.items():
        if sec in KNOWN and isinstance(vals, dict):
            for key in vals:
                if key not in KNOWN[sec]:
                    v.append(f"ExperimentSpec: unknown field {sec}.{key}")

    s = _merged(raw)

    def num(sec, key, check, msg):
        if key not in s[sec]:
            return None
        val = s[sec][key]
        name = FIELD_NAMES[(sec, key)]
        if not _is_number(val):
            v.append(f"{name}: expected a finite number, got {val!r}")
            return None
        if not check(val):
            v.append(f"{name}: {msg}, got {val!r}")
            return None
        return float(val)

    def integer(sec, key, lo, required=False):
        if key not in s[sec]:
            if required:
                v.append(f"{FIELD_NAMES[(sec, key)]}: required")
            return None
        val = s[sec][key]
        name = FIELD_NAMES[(sec, key)]
        if not _is_int(val):
            v.append(f"{name}: expected an integer, got {val!r}")
            return None
        if val < lo:
            v.append(f"{name}: must be >= {lo}, got {val}")
            return None
        return val

    def choice(sec, key, options):
        val = s[sec].get(key)
        if val not in options:
            v.append(f"{FIELD_NAMES[(sec, key)]}: must be one of {', '.join(options)}, got {val!r}")
            return None
        return val

    def flag(sec, key):
        if not isinstance(s[sec].get(key), bool):
            v.append(f"{FIELD_NAMES[(sec, key)]}: must be true or false")

    num("channel", "m", lambda x: True, "")
    num("channel", "sigma", lambda x: x > 0, "must be > 0")
    has_a1 = "a1" in s["channel"]
    has_fd = "fd" in s["channel"]
    if has_a1 and has_fd:
        v.append("Ar1Params: give either a1 or fd, not both")
    elif has_a1:
        num("channel", "a1", lambda x: 0.0 <= x < 1.0, "must lie in [0, 1)")
    elif has_fd:
        num("channel", "fd", lambda x: x >= 0, "must be >= 0")
        num("channel", "ts", lambda x: x > 0, "must be > 0")
    else:
        v.append("Ar1Params.a1: required (no default is assumed for the dependent channel)")

    num("link", "tp", lambda x: x > 0, "must be > 0")
    pt = num("link", "pt", lambda x: x > 0, "must be > 0")
    integer("link", "bits", 1)
    grid = s["link"]["snr_db"]
    if not isinstance(grid, list) or not grid:
        v.append("ExperimentSpec.snr_db: must be a non-empty list of dB values")
    elif not all(_is_number(x) for x in grid):
        v.append("ExperimentSpec.snr_db: every entry must be a finite number")

    variant = choice("policy", "variant", ("fixed", "adaptive"))
    if variant == "adaptive":
        if "p_out" not in s["policy"]:
            v.append("PowerPolicy: adaptive policy requires p_out")
        else:
            num("policy", "p_out", lambda x: 0.0 < x < 1.0, "must lie in (0, 1)")
        if "pt_max" not in s["policy"]:
            v.append("PowerPolicy: adaptive policy requires pt_max")
        else:
            pmax = num("policy", "pt_max", lambda x: x > 0, "must be > 0")
            if pmax is not None and pt is not None and pmax < pt:
                v.append(f"PowerPolicy: pt_max ({pmax}) must be >= pt ({pt})")
    elif variant == "fixed":
        for key in ("p_out", "pt_max"):
            if key in s["policy"]:
                v.append(f"PowerPolicy: {key} only applies to the adaptive policy")

    integer("sim", "n_data", 1)
    integer("sim", "episodes", 1)
    integer("sim", "seed", 0)
    integer("sim", "slot_cap", 1)
    choice("sim", "scheme", ("uncoded", "coded"))
    choice("sim", "orientation", ("literal", "product"))
    if "erasure" in s["sim"]:
        num("sim", "erasure", lambda x: 0.0 <= x <= 1.0, "must lie in [0, 1]")

    ni = s["coding"]["ni"]
    if ni != "opt":
        if isinstance(ni, list):
            if not ni or not all(_is_int(x) and x >= 1 for x in ni):
                v.append("SimConfig.ni: schedule entries must be integers >= 1")
        elif not (_is_int(ni) and ni >= 1):
            v.append(f"SimConfig.ni: must be 'opt', an integer >= 1, or a list, got {ni!r}")
    integer("coding", "ni_max", 1)
    integer("coding", "block", 1)

    for key in ("delay", "coding", "correlated"):
        flag("analytic", key)
    num("analytic", "rho", lambda x: -1.0 < x < 1.0, "must lie in (-1, 1)")
    integer("analytic", "chain_levels", 2)

    if exp in ("fig2", "fig3", "fig4"):
        if not override:
            for (sec, key), want in PINNED.items():
                got = raw.get(sec, {}).get(key) if isinstance(raw.get(sec), dict) else None
                if got is not None and got != want:
                    v.append(
                        f"ExperimentSpec: {sec}.{key} is pinned to {_fmt_setting(want)} for {exp}; "
                        "set allow_override = true to change it"
                    )
        if isinstance(raw.get("sim"), dict) and "scheme" in raw["sim"]:
            v.append(f"ExperimentSpec: {exp} runs both schemes; remove sim.scheme")
    return v


def build_spec(raw: dict, out_override: Optional[str] = None) -> ExperimentSpec:
    violations = validate_raw(raw)
    if violations:
        raise ValidationError(violations)
    exp = raw.get("experiment", "custom")
    s = _merged(raw)
    ch, ln, po, sm, co = s["channel"], s["link"], s["policy"], s["sim"], s["coding"]
    channel = LognormalParams(float(ch["m"]), float(ch["sigma"]))
    tp = float(ln["tp"])
    if "a1" in ch:
        ar1 = Ar1Params.from_a1(float(ch["a1"]), ts=tp)
    else:
        ar1 = Ar1Params(float(ch["fd"]), float(ch.get("ts", tp)))
    pt = float(ln["pt"])
    if po["variant"] == "adaptive":
        policy = PowerPolicy.adaptive_for(pt, float(po["pt_max"]), float(po["p_out"]), channel)
    else:
        policy = PowerPolicy.fixed(pt)
    grid = [float(x) for x in ln["snr_db"]]
    bits = int(ln["bits"])
    ni = co["ni"]
    if isinstance(ni, list):
        ni = [1] + [int(x) for x in ni]
    base = SimConfig(
        n_data=int(sm["n_data"]),
        policy=policy,
        budget=LinkBudget.from_snr_db(grid[0], pt=pt, bits=bits, tp=tp),
        channel=channel,
        ar1=ar1,
        tp=tp,
        scheme=sm["scheme"],
        ni=ni,
        ni_max=co.get("ni_max"),
        block=co.get("block"),
        episodes=int(sm["episodes"]),
        seed=int(sm["seed"]),
        erasure=float(sm["erasure"]) if "erasure" in sm else None,
        orientation=sm["orientation"],
        slot_cap=int(sm["slot_cap"]),
    )
    if exp == "custom":
        regimes = [Regime(f"{base.scheme} a1={base.a1:g}", base)]
    else:
        indep = SimConfig(**{**base.__dict__, "ar1": Ar1Params.from_a1(0.0, ts=tp), "scheme": "uncoded"})
        dep = SimConfig(**{**base.__dict__, "scheme": "uncoded"})
        dep_coded = SimConfig(**{**base.__dict__, "scheme": "coded"})
        regimes = [
            Regime("independent uncoded", indep),
            Regime("dependent uncoded", dep),
            Regime("dependent coded", dep_coded),
        ]
        s["sim"].pop("scheme", None)
    output = out_override or raw.get("output")
    settings = {sec: vals for sec, vals in s.items() if vals}
    return ExperimentSpec(exp, settings, regimes, grid, output, dict(s["analytic"]))


# analytic companions ------------------------------------------------------


def _budget(cfg: SimConfig, snr_db: float) -> LinkBudget:
    return LinkBudget.from_snr_db(snr_db, pt=cfg.policy.pt, bits=cfg.budget.bits, tp=cfg.tp)


def _csv_text(header, rows, comments) -> str:
    buf = io.StringIO()
    for line in comments:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _e(x: float) -> str:
    return f"{x:.11e}"


def delay_rows(spec: ExperimentSpec) -> list:
    levels = int(spec.analytic["chain_levels"])
    rows = []
    for reg in spec.regimes:
        cfg = reg.config
        if cfg.scheme != "uncoded":
            continue
        chain = quantize_chain(cfg.channel, cfg.ar1, levels)
        pi = stationary_distribution(chain.trans)
        for snr_db in spec.snr_db:
            bud = _budget(cfg, snr_db)
            pe = cfg.erasure if cfg.erasure is not None else stationary_erasure(bud, cfg.policy, cfg.channel, cfg.orientation)
            closed = cfg.n_data * cfg.tp / (1.0 - pe) if pe < 1 else math.inf
            if cfg.erasure is not None:
                pe_levels = np.full(levels, cfg.erasure)
            else:
                pe_levels, _ = erasure_from_gain(chain.levels, bud, cfg.policy, cfg.channel, cfg.orientation)
            try:
                t_chain = float(pi @ expected_time_chain(chain, pe_levels, cfg.n_data, cfg.tp)[cfg.n_data])
            except ConvergenceError:
                t_chain = math.inf
            rows.append([repr(snr_db), repr(cfg.a1), _e(pe), _e(closed), _e(t_chain), str(levels)])
    return rows


DELAY_HEADER = ["snr_db", "a1", "pe_stationary", "expected_time_independent", "expected_time_chain", "chain_levels"]
CODING_HEADER = ["snr_db", "dof", "ni_star", "expected_seconds", "expected_joules"]
ANALYTIC_HEADER = ["snr_db", "rho", "ber_single", "ber_joint_correlated", "ber_joint_independent",
                   "pe_single", "pe_stationary"]


def coding_rows(spec: ExperimentSpec) -> list:
    rows = []
    coded = [r.config for r in spec.regimes if r.config.scheme == "coded"]
    if not coded:
        return rows
    cfg = coded[0]
    k = cfg.block_size
    for snr_db in spec.snr_db:
        bud = _budget(cfg, snr_db)
        pe = cfg.erasure if cfg.erasure is not None else stationary_erasure(bud, cfg.policy, cfg.channel, cfg.orientation)
        pe = min(pe, 1.0 - 1e-9)
        plan = optimize_ni(ErasureProfile.constant(pe), k, cfg.tp, cfg.ni_max or default_ni_max(k, pe))
        for dof in range(1, k + 1):
            rows.append([repr(snr_db), str(dof), str(int(plan.ni_star[dof])),
                         _e(plan.seconds[dof]), _e(plan.joules[dof])])
    return rows


def correlated_rows(spec: ExperimentSpec) -> list:
    """Single-link and two-link joint error bounds at the median gain ``e^m``."""
    cfg = spec.regimes[0].config
    rho = float(spec.analytic["rho"])
    p = cfg.channel
    rows = []
    for snr_db in spec.snr_db:
        bud = _budget(cfg, snr_db)
        # at h = e^m the argument reduces to +-ln(SNR) / sigma
        x = math.log(bud.snr) / p.sigma
        if cfg.orientation == "product":
            x = -x
        single = q_function(x)
        joint = q2(x, x, rho)
        pe_single = packet_erasure(single, bud.bits)
        pe_stat = stationary_erasure(bud, cfg.policy, p, cfg.orientation)
        rows.append([repr(snr_db), repr(rho), _e(single), _e(joint), _e(single * single),
                     _e(pe_single), _e(pe_stat)])
    return rows


# commands -----------------------------------------------------------------


def _companion_path(out: str, tag: str) -> str:
    stem, ext = os.path.splitext(out)
    return f"{stem}.{tag}{ext or '.csv'}"


def _write(path: str, text: str):
    d = os.path.dirname(path)
    if d:
        os.makedirs(d, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def execute(spec: ExperimentSpec, stdout=None, summary=None) -> str:
    """Run every regime of ``spec``; return the main CSV text and write
    companions when an output path is set."""
    stdout = stdout or sys.stdout
    summary = summary or stdout
    rows = []
    for reg in spec.regimes:
        def report(row, label=reg.label):
            print(
                f"{spec.experiment} {label} {row.policy} snr={row.snr_db:g} dB: "
                f"throughput={row.mean_throughput:.4g} pkt/s delay={row.mean_time:.4g} s "
                f"erasure={row.mean_erasure:.4g} energy={row.mean_energy:.4g} J",
                file=summary,
            )
        rows.extend(sweep(reg.config, spec.snr_db, progress=report).rows)
    comments = spec.comment_lines()
    text = ResultTable(rows).to_csv(comments=comments)
    if spec.output is None:
        stdout.write(text)
        return text
    _write(spec.output, text)
    if spec.analytic.get("delay") and any(r.config.scheme == "uncoded" for r in spec.regimes):
        _write(_companion_path(spec.output, "delay"), _csv_text(DELAY_HEADER, delay_rows(spec), comments))
    if spec.analytic.get("coding") and any(r.config.scheme == "coded" for r in spec.regimes):
        _write(_companion_path(spec.output, "coding"), _csv_text(CODING_HEADER, coding_rows(spec), comments))
    if spec.analytic.get("correlated"):
        _write(_companion_path(spec.output, "analytic"), _csv_text(ANALYTIC_HEADER, correlated_rows(spec), comments))
    return text


def _guard(fn):
    try:
        return fn()
    except ValidationError as exc:
        for line in exc.violations:
            print(f"validation error: {line}", file=sys.stderr)
        return EXIT_VALIDATION
    except DomainError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ConvergenceError as exc:
        print(f"convergence failure: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


def cmd_run(args) -> int:
    def go():
        spec = build_spec(load_raw(args.spec), out_override=args.out)
        execute(spec, summary=sys.stderr if spec.output is None else sys.stdout)
        return EXIT_OK
    return _guard(go)


def cmd_validate(args) -> int:
    def go():
        violations = validate_raw(load_raw(args.spec))
        for line in violations:
            print(line)
        if violations:
            return EXIT_VALIDATION
        print(f"{args.spec}: ok")
        return EXIT_OK
    return _guard(go)


def _float_list(text: str) -> List[float]:
    try:
        return [float(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}") from None


def cmd_sweep(args) -> int:
    raw = {
        "experiment": "custom",
        "channel": {"a1": args.a1, "m": args.m, "sigma": args.sigma},
        "link": {"snr_db": args.snr_db, "bits": args.bits, "tp": args.tp, "pt": args.pt},
        "policy": {"variant": args.policy},
        "sim": {"n_data": args.n_data, "episodes": args.episodes, "seed": args.seed, "scheme": args.scheme},
    }
    if args.policy == "adaptive":
        raw["policy"]["p_out"] = args.p_out
        raw["policy"]["pt_max"] = args.pt_max
    if args.ni is not None:
        raw["coding"] = {"ni": args.ni if args.ni == "opt" else _int_or_self(args.ni)}
    if args.out:
        raw["output"] = args.out

    def go():
        spec = build_spec(raw)
        execute(spec, summary=sys.stderr if spec.output is None else sys.stdout)
        return EXIT_OK
    return _guard(go)


def _int_or_self(text):
    try:
        return int(text)
    except ValueError:
        return text


def read_csv_columns(path: str):
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln and not ln.startswith("#")]
    reader = csv.DictReader(lines)
    return reader.fieldnames or [], list(reader)


SERIES_KEYS = ("scheme", "policy", "a1")
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")


def render_svg(series: Dict[str, list], xlabel: str, ylabel: str, width=640, height=420) -> str:
    left, right, top, bottom = 70, 170, 20, 50
    xs = [x for pts in series.values() for x, _ in pts]
    ys = [y for pts in series.values() for _, y in pts]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y0, y1 = y0 - 1, y1 + 1
    pw, ph = width - left - right, height - top - bottom

    def sx(x):
        return left + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return top + (1 - (y - y0) / (y1 - y0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#000"/>',
    ]
    for frac in (0.0, 0.5, 1.0):
        xv = x0 + frac * (x1 - x0)
        yv = y0 + frac * (y1 - y0)
        out.append(f'<text x="{sx(xv):.2f}" y="{top + ph + 16}" text-anchor="middle">{xv:.4g}</text>')
        out.append(f'<text x="{left - 6}" y="{sy(yv) + 4:.2f}" text-anchor="end">{yv:.4g}</text>')
    out.append(f'<text x="{left + pw / 2:.2f}" y="{height - 12}" text-anchor="middle">{_esc(xlabel)}</text>')
    out.append(
        f'<text x="16" y="{top + ph / 2:.2f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {top + ph / 2:.2f})">{_esc(ylabel)}</text>'
    )
    for n, (name, pts) in enumerate(series.items()):
        color = PALETTE[n % len(PALETTE)]
        coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in sorted(pts))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>')
        ly = top + 14 + 16 * n
        out.append(f'<line x1="{left + pw + 10}" y1="{ly - 4}" x2="{left + pw + 30}" y2="{ly - 4}" stroke="{color}"/>')
        out.append(f'<text x="{left + pw + 34}" y="{ly}">{_esc(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _esc(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def cmd_plot(args) -> int:
    def go():
        header, rows = read_csv_columns(args.csv)
        for col in (args.x, args.y):
            if col not in header:
                raise ValidationError([f"plot: column {col!r} not in {args.csv}"])
        keys = [k for k in SERIES_KEYS if k in header and k not in (args.x, args.y)]
        series: Dict[str, list] = {}
        for r in rows:
            try:
                x, y = float(r[args.x]), float(r[args.y])
            except ValueError:
                raise ValidationError([f"plot: non-numeric value in {args.x} or {args.y}"]) from None
            if not (math.isfinite(x) and math.isfinite(y)):
                continue
            name = " ".join(f"{k}={r[k]}" for k in keys) or args.y
            series.setdefault(name, []).append((x, y))
        if not series:
            raise ValidationError(["plot: no finite points to draw"])
        _write(args.out, render_svg(series, args.x, args.y))
        return EXIT_OK
    return _guard(go)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fadenc", description="Delay and throughput of packet delivery over log-normal AR(1) fading.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run an experiment spec (TOML)")
    p.add_argument("spec")
    p.add_argument("--out", help="override the output path in the experiment file")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("validate", help="check a spec without running it")
    p.add_argument("spec")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("sweep", help="ad hoc SNR sweep from flags")
    p.add_argument("--snr-db", type=_float_list, default=[0.0, 10.0, 20.0, 30.0])
    p.add_argument("--episodes", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scheme", choices=("uncoded", "coded"), default="uncoded")
    p.add_argument("--policy", choices=("fixed", "adaptive"), default="fixed")
    p.add_argument("--a1", type=float, required=True)
    p.add_argument("--out")
    p.add_argument("--n-data", type=int, default=10)
    p.add_argument("--bits", type=int, default=8)
    p.add_argument("--ni", default=None, help="coded round size or 'opt'")
    p.add_argument("--p-out", type=float, default=0.1)
    p.add_argument("--pt-max", type=float, default=4.0)
    p.add_argument("--pt", type=float, default=1.0)
    p.add_argument("--tp", type=float, default=1.0 / 150)
    p.add_argument("--m", type=float, default=-0.5)
    p.add_argument("--sigma", type=float, default=1.0)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("plot", help="draw CSV columns as an SVG line chart")
    p.add_argument("csv")
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
