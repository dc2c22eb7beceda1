"""Compare the compiled kernels against the pure-Python fallback.

Usage: ``python benchmarks/bench_kernels.py [--episodes N] [--repeat R]``

Times the AR(1) recursion on a long trace and full Monte Carlo episodes for
an uncoded and a coded configuration, then checks that both backends return
identical results.
"""

import argparse
import math
import time

import numpy as np

from fadenc import kernels
from fadenc.channel import Ar1Params, LognormalParams
from fadenc.link import LinkBudget, PowerPolicy
from fadenc.mcsim import SimConfig, run_episodes


def best_of(fn, repeat):
    best = math.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--episodes", type=int, default=2000)
    ap.add_argument("--trace", type=int, default=1_000_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    compiled = kernels.compiled_backend()
    if compiled is None:
        raise SystemExit("compiled extension is not built; run `pip install --no-build-isolation -e .` first")
    backends = {"compiled": compiled, "python": kernels.python_backend}

    z = np.random.default_rng(0).standard_normal(args.trace)
    a1 = 0.9
    innov = math.sqrt(1 - a1 * a1)
    print(f"ar1_log, {args.trace} slots")
    ref = None
    times = {}
    for name, be in backends.items():
        t, out = best_of(lambda: np.asarray(be.ar1_log(z, -0.5, 1.0, a1, innov)), args.repeat)
        times[name] = t
        ref = out if ref is None else ref
        print(f"  {name:9s} {t * 1e3:9.2f} ms   identical={np.array_equal(out, ref)}")
    print(f"  speedup   {times['python'] / times['compiled']:9.1f}x")

    p = LognormalParams(-0.5, 1.0)
    # short episodes are dominated by per-episode seed derivation, long ones
    # by the slot loop
    cases = {
        "uncoded fixed 5 dB, 10 packets": dict(n_data=10, scheme="uncoded", policy=PowerPolicy.fixed()),
        "coded adaptive 5 dB, 10 packets": dict(n_data=10, scheme="coded",
                                                policy=PowerPolicy.adaptive_for(1.0, 4.0, 0.1, p)),
        "uncoded fixed 0 dB, 200 packets": dict(n_data=200, scheme="uncoded", policy=PowerPolicy.fixed(),
                                                budget=LinkBudget.from_snr_db(0.0)),
    }
    for label, kw in cases.items():
        kw.setdefault("budget", LinkBudget.from_snr_db(5.0))
        cfg = SimConfig(channel=p, ar1=Ar1Params.from_a1(0.9), episodes=args.episodes, seed=1, **kw)
        print(f"run_episodes, {label}, {args.episodes} episodes")
        results = {}
        for name, be in backends.items():
            t, out = best_of(lambda: run_episodes(cfg, backend=be), args.repeat)
            times[name] = t
            results[name] = out
            print(f"  {name:9s} {t * 1e3:9.2f} ms   {t / args.episodes * 1e6:8.1f} us/episode")
        print(f"  speedup   {times['python'] / times['compiled']:9.1f}x   "
              f"identical={results['compiled'] == results['python']}")


if __name__ == "__main__":
    main()
