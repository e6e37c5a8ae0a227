"""Compare the compiled and numpy kernels on a market-sized panel.

    python benchmarks/bench_kernels.py --tickers 359 --days 3750 --lag 5
"""
import argparse
import time

import numpy as np

from infoflow import _pykernels
from infoflow.synth import SynthSpec, gen_var

try:
    from infoflow import _ckernels
except ImportError:
    _ckernels = None


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--tickers", type=int, default=359)
    ap.add_argument("--days", type=int, default=3750)
    ap.add_argument("--lag", type=int, default=5)
    ap.add_argument("--targets", type=int, default=5, help="targets timed per backend")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    panel = gen_var(SynthSpec(args.tickers, args.days, seed=1))
    series = np.ascontiguousarray(panel.returns.T)
    backends = {"numpy": _pykernels}
    if _ckernels is not None:
        backends["cython"] = _ckernels
    else:
        print("compiled kernels unavailable; timing numpy only")

    rows = []
    for name, mod in backends.items():
        stack = mod.lag_stack(series, args.lag)
        t_stack = best_of(lambda: mod.lag_stack(series, args.lag), args.repeat)
        t_target = best_of(
            lambda: [mod.granger_target(series, stack, j, args.lag) for j in range(args.targets)],
            args.repeat) / args.targets
        x = series[0]
        r = 0.2 * x.std(ddof=1)
        t_apen = best_of(lambda: (mod.match_counts(x, 2, r), mod.match_counts(x, 3, r)), args.repeat)
        rows.append((name, t_stack, t_target, t_target * args.tickers, t_apen))

    print(f"N={args.tickers} T={args.days} lag={args.lag}")
    print(f"{'backend':8s} {'lag_stack':>10s} {'per target':>11s} {'full cell':>10s} {'apen/ticker':>12s}")
    for name, *times in rows:
        print(f"{name:8s} " + " ".join(f"{v:>10.4f}s" for v in times))
    if len(rows) == 2:
        py, cy = rows
        print(f"speed-up: granger x{py[2] / cy[2]:.1f}, apen x{py[4] / cy[4]:.1f}")


if __name__ == "__main__":
    main()
