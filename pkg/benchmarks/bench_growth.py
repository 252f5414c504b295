#!/usr/bin/env python3
"""Compare the compiled and pure-Python contact-growth kernels.

Generates random nucleus layouts at several sizes, runs both kernels on
identical inputs, checks they agree, and reports wall time per call.
"""

import argparse
import time

import numpy as np

from nucleoforge import _growth_py
from nucleoforge.synth import generate_label

try:
    from nucleoforge import _growth
except ImportError:
    _growth = None


def make_map(side, seed):
    rng = np.random.default_rng(seed)
    label, _, _ = generate_label((side, side), 3, 1.2, rng)
    return label.instance_ids


def time_kernel(grow, inst, max_iters, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        grow(inst, max_iters)
        best = min(best, time.perf_counter() - t0)
    return best


def agree(a, b):
    da, ia, ra, ca = a
    db, ib, rb, cb = b
    sa = set(zip(np.asarray(ia).tolist(), np.asarray(ra).tolist(),
                 np.asarray(ca).tolist()))
    sb = set(zip(np.asarray(ib).tolist(), np.asarray(rb).tolist(),
                 np.asarray(cb).tolist()))
    return np.array_equal(da, db) and sa == sb


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sides", default="64,128,256,512",
                    help="comma-separated map sizes")
    ap.add_argument("--max-iters", type=int, default=10)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    if _growth is None:
        print("compiled kernel not available; showing pure-Python only")
    print("%8s %12s %12s %9s" % ("side", "python [s]", "compiled [s]",
                                 "speedup"))
    for side in (int(s) for s in args.sides.split(",")):
        inst = make_map(side, args.seed)
        t_py = time_kernel(_growth_py.grow, inst, args.max_iters,
                           args.repeats)
        if _growth is None:
            print("%8d %12.4f %12s %9s" % (side, t_py, "-", "-"))
            continue
        t_c = time_kernel(_growth.grow, inst, args.max_iters, args.repeats)
        out_c = _growth.grow(inst, args.max_iters)
        out_py = _growth_py.grow(inst, args.max_iters)
        tag = "" if agree(out_c, out_py) else "  MISMATCH!"
        print("%8d %12.4f %12.4f %8.1fx%s" % (side, t_py, t_c, t_py / t_c,
                                              tag))


if __name__ == "__main__":
    main()
