#!/usr/bin/env python3
"""Time the numba kernels against their pure-numpy twins.

Both variants are called directly, so the RCDETECT_DISABLE_NUMBA flag does not
matter here. Each kernel is first run once to trigger compilation and to check
that the two variants agree.

Usage:
    python benchmarks/bench_kernels.py [--repeat N] [--steps S] [--json PATH]
"""

import argparse
import json
import time

import numpy as np

from rcdetect import kernels, models
from rcdetect.reservoir import build_reservoir


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def cases(steps):
    lv = models.LotkaVolterra(models.lv_fig2_like())
    p = lv.params
    F = np.random.default_rng(0).uniform(-0.5, 0.5, (steps + 1, 8))
    x0 = models.lv_fig2_equilibrium()
    yield ("heun_lv (N=8)",
           lambda: kernels.heun_lv_numba(x0, F, 0.005, p.e, 1 / p.K, p.P),
           lambda: kernels.heun_lv_numpy(x0, F, 0.005, p.e, 1 / p.K, p.P))

    wc = models.WilsonCowan(models.wc_preset("oscillatory"))
    args = wc.params.kernel_args()
    Fw = np.random.default_rng(1).uniform(-0.4, 0.6, (steps + 1, 4))
    xw = np.full(8, 0.2)
    yield ("heun_wc (4 pairs)",
           lambda: kernels.heun_wc_numba(xw, Fw, 0.2, *args),
           lambda: kernels.heun_wc_numpy(xw, Fw, 0.2, *args))

    for M in (100, 1000):
        res = build_reservoir(M, 8, seed=0)
        A = res.A
        U = np.random.default_rng(2).uniform(0.5, 3.0, (steps, 8)) @ res.W_in.T
        r0 = np.zeros(M)

        def nb_run(A=A, U=U, r0=r0):
            buf = U.copy()
            kernels.drive_inplace_numba(A.indptr, A.indices, A.data, buf, r0, 0.0)
            return buf

        def np_run(A=A, U=U, r0=r0):
            buf = U.copy()
            kernels.drive_inplace_numpy(A.indptr, A.indices, A.data, buf, r0, 0.0)
            return buf

        yield (f"reservoir drive (M={M})", nb_run, np_run)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--steps", type=int, default=20_000)
    ap.add_argument("--json", help="write results to this file")
    args = ap.parse_args()

    rows = []
    print(f"{'kernel':<26}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>10}{'max |diff|':>14}")
    for name, fast, slow in cases(args.steps):
        a, b = fast(), slow()
        a = a[0] if isinstance(a, tuple) else a
        b = b[0] if isinstance(b, tuple) else b
        diff = float(np.max(np.abs(a - b)))
        t_nb = _best(fast, args.repeat)
        t_np = _best(slow, args.repeat)
        rows.append({"kernel": name, "steps": args.steps, "numba_s": t_nb, "numpy_s": t_np,
                     "speedup": t_np / t_nb, "max_abs_diff": diff})
        print(f"{name:<26}{t_nb:>12.4f}{t_np:>12.4f}{t_np / t_nb:>10.1f}{diff:>14.2e}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
