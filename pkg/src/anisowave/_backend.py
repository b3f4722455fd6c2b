"""Select the compiled kernels when available, else the numpy fallback.

Set ``ANISOWAVE_PURE_PYTHON=1`` to force the fallback.  Batch queries are
split across ``ANISOWAVE_NUM_THREADS`` worker threads; every query is
independent, so results do not depend on the thread count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import _kernels_py

_impl = _kernels_py
BACKEND = "python"
if os.environ.get("ANISOWAVE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled  # type: ignore[attr-defined]

        _impl = _compiled
        BACKEND = "compiled"
    except ImportError:  # pragma: no cover - depends on the build
        pass

LEAF = 32


def num_threads() -> int:
    try:
        return max(1, int(os.environ.get("ANISOWAVE_NUM_THREADS", "1")))
    except ValueError:
        return 1


class BoxTree:
    """Median-split tree over a point cloud.

    Points are reordered so node ``c`` covers ``points[start[c]:stop[c]]``;
    ``lo``/``hi`` hold its bounding box and leaves have ``left == -1``.
    """

    def __init__(self, points: np.ndarray, leaf: int = LEAF):
        pts = np.ascontiguousarray(points, dtype=float)
        n = len(pts)
        perm = np.arange(n)
        left, right, start, stop = [], [], [], []
        # iterative build; node ids are assigned in creation order
        pending = [(0, n, -1, 0)]
        while pending:
            s, e, parent, side = pending.pop()
            node = len(start)
            start.append(s)
            stop.append(e)
            left.append(-1)
            right.append(-1)
            if parent >= 0:
                (left if side == 0 else right)[parent] = node
            if e - s <= leaf:
                continue
            sub = pts[perm[s:e]]
            axis = int(np.argmax(np.ptp(sub, axis=0)))
            perm[s:e] = perm[s:e][np.argsort(sub[:, axis], kind="stable")]
            mid = (s + e) // 2
            pending.append((mid, e, node, 1))
            pending.append((s, mid, node, 0))
        self.perm = perm
        self.points = np.ascontiguousarray(pts[perm])
        self.left = np.array(left, dtype=np.int_)
        self.right = np.array(right, dtype=np.int_)
        self.start = np.array(start, dtype=np.int_)
        self.stop = np.array(stop, dtype=np.int_)
        nn = len(start)
        self.lo = np.empty((nn, pts.shape[1]))
        self.hi = np.empty((nn, pts.shape[1]))
        for c in range(nn):
            blk = self.points[self.start[c] : self.stop[c]]
            self.lo[c] = blk.min(axis=0)
            self.hi[c] = blk.max(axis=0)

    @property
    def depth(self) -> int:
        depth = np.zeros(len(self.start), dtype=int)
        for c in range(len(self.start)):
            for child in (self.left[c], self.right[c]):
                if child >= 0:
                    depth[child] = depth[c] + 1
        return int(depth.max())


class ChunkedCloud:
    """Point cloud with a box tree; batch nearest-distance queries."""

    def __init__(self, points: np.ndarray):
        self.tree = BoxTree(points)
        self.points = self.tree.points

    def _run(self, fn, queries, *extra):
        q = np.ascontiguousarray(np.atleast_2d(queries), dtype=float)
        nt = num_threads()
        if nt == 1 or len(q) < 2 * nt:
            return fn(q, self.points, *extra, self.tree)
        parts = np.array_split(np.arange(len(q)), nt)
        with ThreadPoolExecutor(max_workers=nt) as pool:
            outs = list(pool.map(lambda ix: fn(np.ascontiguousarray(q[ix]), self.points, *extra, self.tree), parts))
        return np.concatenate(outs)

    def min_aniso(self, queries, a) -> np.ndarray:
        a = np.ascontiguousarray(a, dtype=float)
        return np.asarray(self._run(_impl.min_aniso_dist, queries, a))

    def min_parabolic(self, queries) -> np.ndarray:
        return np.asarray(self._run(_impl.min_parabolic_dist, queries))


def backend_name() -> str:
    return BACKEND
