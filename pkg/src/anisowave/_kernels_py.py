"""Pure numpy implementations of the distance kernels.

Same signatures and results as the compiled module.  The box tree is
accepted for compatibility but the scan is exhaustive.
"""

from __future__ import annotations

import numpy as np

_CELLS = 2_000_000


def _block(npts: int) -> int:
    # bound the temporary (queries x points) array
    return max(1, _CELLS // max(npts, 1))


def min_aniso_dist(queries, points, a, tree=None):
    queries = np.ascontiguousarray(queries, dtype=float)
    points = np.ascontiguousarray(points, dtype=float)
    a = np.ascontiguousarray(a, dtype=float)
    out = np.empty(len(queries))
    blk = _block(len(points))
    for s in range(0, len(queries), blk):
        q = queries[s : s + blk]
        acc = np.zeros((len(q), len(points)))
        for i in range(points.shape[1]):
            acc += np.abs(q[:, None, i] - points[None, :, i]) ** a[i]
        out[s : s + blk] = acc.min(axis=1)
    return out


def min_parabolic_dist(queries, points, tree=None):
    queries = np.ascontiguousarray(queries, dtype=float)
    points = np.ascontiguousarray(points, dtype=float)
    out = np.empty(len(queries))
    d = points.shape[1] - 1
    blk = _block(len(points))
    for s in range(0, len(queries), blk):
        q = queries[s : s + blk]
        sq = np.zeros((len(q), len(points)))
        for i in range(d):
            sq += (q[:, None, i] - points[None, :, i]) ** 2
        dt = np.abs(q[:, None, d] - points[None, :, d])
        out[s : s + blk] = (np.sqrt(sq) + np.sqrt(dt)).min(axis=1)
    return out
