"""Time the compiled distance kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py --points 20000 --queries 20000

Both implementations are called on the same tree and their outputs are
compared before timings are reported.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from anisowave import _kernels_py
from anisowave._backend import BoxTree

try:
    from anisowave import _kernels as _compiled
except ImportError:  # pragma: no cover
    _compiled = None


def _best(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def run(npoints: int, nqueries: int, dim: int, repeat: int, seed: int) -> list[dict]:
    rng = np.random.default_rng(seed)
    pts = rng.random((npoints, dim))
    q = np.ascontiguousarray(rng.random((nqueries, dim)))
    a = np.ascontiguousarray(np.linspace(1.0, 2.0, dim))
    tree = BoxTree(pts)
    cases = {
        "min_aniso_dist": lambda impl: impl.min_aniso_dist(q, tree.points, a, tree),
        "min_parabolic_dist": lambda impl: impl.min_parabolic_dist(q, tree.points, tree),
    }
    rows = []
    for name, call in cases.items():
        ref = np.asarray(call(_kernels_py))
        t_py = _best(lambda: call(_kernels_py), repeat)
        row = {"kernel": name, "python_s": t_py, "compiled_s": None, "speedup": None, "max_abs_diff": None}
        if _compiled is not None:
            out = np.asarray(call(_compiled))
            row["max_abs_diff"] = float(np.max(np.abs(out - ref)))
            row["compiled_s"] = _best(lambda: call(_compiled), repeat)
            row["speedup"] = t_py / row["compiled_s"]
        rows.append(row)
    return rows


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=20000)
    ap.add_argument("--queries", type=int, default=20000)
    ap.add_argument("--dim", type=int, default=2)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    rows = run(args.points, args.queries, args.dim, args.repeat, args.seed)
    print(f"{'kernel':<20} {'python [s]':>11} {'compiled [s]':>13} {'speedup':>8} {'max |diff|':>11}")
    for r in rows:
        comp = "n/a" if r["compiled_s"] is None else f"{r['compiled_s']:.4f}"
        sp = "n/a" if r["speedup"] is None else f"{r['speedup']:.1f}x"
        diff = "n/a" if r["max_abs_diff"] is None else f"{r['max_abs_diff']:.1e}"
        print(f"{r['kernel']:<20} {r['python_s']:>11.4f} {comp:>13} {sp:>8} {diff:>11}")


if __name__ == "__main__":
    main()
