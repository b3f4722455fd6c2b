"""Space-time cylinders, sampled singular sets and distance weights.

Time is always the last coordinate.  Boundary samples sit on nested dyadic
lattices, so halving the spacing produces a superset of the previous cloud
and can only decrease sampled distances.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np

from ._backend import ChunkedCloud
from .anisotropy import Anisotropy
from .errors import InvalidArgument

DESCRIPTORS = ("parabolic_boundary", "edge", "vertex", "custom")


@dataclass(frozen=True)
class Cylinder:
    """Spatial box or L-shape times ``[0, T]``.

    The L-shape (``d == 2`` only) is the box with its upper-right quadrant
    ``x > mid_x, y > mid_y`` removed.
    """

    lo: tuple[float, ...]
    hi: tuple[float, ...]
    T: float
    shape: str = "box"

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(float(v) for v in self.lo))
        object.__setattr__(self, "hi", tuple(float(v) for v in self.hi))
        if not (isinstance(self.T, (int, float)) and self.T > 0 and math.isfinite(self.T)):
            raise InvalidArgument(f"time horizon must be positive, got {self.T}")
        object.__setattr__(self, "T", float(self.T))
        if len(self.lo) != len(self.hi) or len(self.lo) < 1:
            raise InvalidArgument("spatial bounds must have matching positive length")
        if any(h <= l for l, h in zip(self.lo, self.hi)):
            raise InvalidArgument("spatial domain is degenerate")
        if self.shape not in ("box", "lshape"):
            raise InvalidArgument(f"unknown spatial shape {self.shape!r}")
        if self.shape == "lshape" and self.d != 2:
            raise InvalidArgument("L-shaped domains are supported for d = 2 only")

    @classmethod
    def unit(cls, d: int, T: float = 1.0, shape: str = "box") -> "Cylinder":
        return cls((0.0,) * d, (1.0,) * d, float(T), shape)

    @property
    def d(self) -> int:
        return len(self.lo)

    @property
    def D(self) -> int:
        return self.d + 1

    @property
    def box(self) -> tuple[tuple[float, float], ...]:
        return tuple(zip(self.lo, self.hi)) + ((0.0, float(self.T)),)

    @property
    def mid(self) -> tuple[float, ...]:
        return tuple((l + h) / 2 for l, h in zip(self.lo, self.hi))

    def contains_spatial(self, x: np.ndarray, closed: bool = True) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        lo, hi = np.array(self.lo), np.array(self.hi)
        if closed:
            inside = np.all((x >= lo) & (x <= hi), axis=1)
        else:
            inside = np.all((x > lo) & (x < hi), axis=1)
        if self.shape == "lshape":
            m = np.array(self.mid)
            if closed:
                cut = np.all(x > m, axis=1)
            else:
                cut = np.all(x >= m, axis=1)
            inside &= ~cut
        return inside

    def contains(self, pts: np.ndarray, closed: bool = True) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        t = pts[:, -1]
        tin = (t >= 0) & (t <= self.T) if closed else (t > 0) & (t < self.T)
        return tin & self.contains_spatial(pts[:, :-1], closed)

    def to_json(self) -> dict:
        return {"lo": list(self.lo), "hi": list(self.hi), "T": self.T, "shape": self.shape}


@dataclass(frozen=True, eq=False)
class SingularSet:
    points: np.ndarray
    delta: int
    descriptor: str = "custom"
    tags: np.ndarray | None = None
    spacing: tuple[float, ...] | None = None

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.size == 0:
            raise InvalidArgument("singular set must be nonempty")
        object.__setattr__(self, "points", pts)
        if not 0 <= self.delta <= pts.shape[1] - 1:
            raise InvalidArgument(f"intrinsic dimension {self.delta} outside [0, {pts.shape[1] - 1}]")
        if self.descriptor not in DESCRIPTORS:
            raise InvalidArgument(f"unknown descriptor {self.descriptor!r}")

    @property
    def D(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return len(self.points)

    @cached_property
    def _cloud(self) -> ChunkedCloud:
        return ChunkedCloud(self.points)

    def min_aniso(self, queries, aniso: Anisotropy) -> np.ndarray:
        q = np.atleast_2d(np.asarray(queries, dtype=float))
        if q.shape[1] != self.D or aniso.D != self.D:
            raise InvalidArgument(f"queries and anisotropy must have {self.D} coordinates")
        return self._cloud.min_aniso(q, aniso.a_float)

    def min_parabolic(self, queries) -> np.ndarray:
        q = np.atleast_2d(np.asarray(queries, dtype=float))
        if q.shape[1] != self.D:
            raise InvalidArgument(f"queries must have {self.D} coordinates")
        return self._cloud.min_parabolic(q)

    def check_resolution(self, cell_widths: Sequence[float]):
        """Refuse use with cells narrower than twice the sample spacing."""
        if self.spacing is None:
            return
        for i, (s, w) in enumerate(zip(self.spacing, cell_widths)):
            if s > 0.5 * w * (1 + 1e-12):
                raise InvalidArgument(
                    f"singular-set spacing {s:.3g} on axis {i} exceeds half the finest cell width {w:.3g}"
                )

    def to_csv(self, path):
        tags = self.tags if self.tags is not None else np.full(len(self.points), self.descriptor)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"x{i}" for i in range(self.D)] + ["tag"])
            for p, t in zip(self.points, tags):
                w.writerow([repr(float(v)) for v in p] + [str(t)])


def _axis_samples(lo: float, hi: float, h: float, breaks: Sequence[float] = ()) -> np.ndarray:
    # nested dyadic lattice: interval count is a power of two per piece
    knots = [lo] + sorted(b for b in breaks if lo < b < hi) + [hi]
    out = []
    for a, b in zip(knots[:-1], knots[1:]):
        n = 2 ** max(0, math.ceil(math.log2((b - a) / h - 1e-12)))
        out.append(np.linspace(a, b, n + 1)[:-1])
    out.append(np.array([hi]))
    return np.concatenate(out)


def parabolic_boundary(cyl: Cylinder, spacing) -> SingularSet:
    """Sample ``(D x {0}) U (dD x [0, T])`` with per-axis gap at most ``spacing``."""
    sp = np.broadcast_to(np.asarray(spacing, dtype=float), (cyl.D,)).copy()
    if np.any(sp <= 0) or not np.all(np.isfinite(sp)):
        raise InvalidArgument(f"spacing must be positive, got {spacing}")
    d = cyl.d
    breaks = [[cyl.mid[i]] if cyl.shape == "lshape" else [] for i in range(d)]
    axes = [_axis_samples(cyl.lo[i], cyl.hi[i], sp[i], breaks[i]) for i in range(d)]
    taxis = _axis_samples(0.0, cyl.T, sp[d])
    width = np.array(cyl.hi) - np.array(cyl.lo)
    eps = 1e-9 * width

    def on_boundary(x):
        if len(x) == 0:
            return np.zeros(0, dtype=bool)
        hit = np.zeros(len(x), dtype=bool)
        for i in range(d):
            for s in (-1.0, 1.0):
                shifted = x.copy()
                shifted[:, i] += s * eps[i]
                hit |= ~cyl.contains_spatial(shifted, closed=False)
        return hit & cyl.contains_spatial(x, closed=True)

    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    bottom = mesh[cyl.contains_spatial(mesh, closed=True)]
    bottom_edge = on_boundary(bottom)

    # lateral: every spatial point on a face hyperplane and on the boundary
    faces = []
    for i in range(d):
        vals = [cyl.lo[i], cyl.hi[i]] + ([cyl.mid[i]] if cyl.shape == "lshape" else [])
        for v in vals:
            sub = [axes[k] if k != i else np.array([v]) for k in range(d)]
            pts = np.stack(np.meshgrid(*sub, indexing="ij"), axis=-1).reshape(-1, d)
            faces.append(pts[on_boundary(pts)])
    ring = np.unique(np.concatenate(faces), axis=0) if faces else np.zeros((0, d))
    ring_t = taxis[taxis > 0]

    pts_b = np.column_stack([bottom, np.zeros(len(bottom))])
    pts_l = np.column_stack([np.repeat(ring, len(ring_t), axis=0), np.tile(ring_t, len(ring))])
    points = np.vstack([pts_b, pts_l])
    tags = np.concatenate(
        [np.where(bottom_edge, "edge", "bottom"), np.full(len(pts_l), "lateral")]
    ).astype(object)
    if cyl.shape == "lshape":
        corner = np.all(np.isclose(points[:, :d], np.array(cyl.mid)), axis=1)
        tags[corner] = "edge"
    return SingularSet(points, d, "parabolic_boundary", tags, tuple(float(s) for s in sp))


def rho_a(x, M: SingularSet, aniso: Anisotropy) -> np.ndarray:
    """``min(1, dist_a(x, M))`` by a scan over the sampled set."""
    return np.minimum(1.0, M.min_aniso(x, aniso))


def parabolic_delta(x, t=None, M: SingularSet | None = None) -> np.ndarray:
    """Parabolic distance ``inf_M |x - y| + sqrt(|t - s|)``.

    Either pass full space-time points as ``x`` with ``t=None`` or spatial
    points and times separately.
    """
    if M is None:
        raise InvalidArgument("a singular set is required")
    x = np.asarray(x, dtype=float)
    if t is not None:
        x = np.column_stack([np.atleast_2d(x.reshape(-1, M.D - 1)), np.atleast_1d(t)])
    return M.min_parabolic(x)


class ProbeStats(NamedTuple):
    min: float
    max: float
    median: float
    n: int


def weight_equivalence_probe(
    cyl: Cylinder, aniso: Anisotropy, n_samples: int, spacing: float = 1 / 64, seed: int = 0,
    M: SingularSet | None = None, margin: float = 16.0,
) -> ProbeStats:
    """Statistics of ``rho_a / delta**((d+2)/d)`` at random interior points.

    The boundary is sampled with spatial gap ``spacing`` and temporal gap
    ``spacing**2``, the parabolic scaling under which both weights carry a
    sampling error of order ``spacing``.  Points with parabolic distance
    below ``margin * spacing`` are rejected so that this error stays small.
    """
    d = cyl.d
    if aniso.D != cyl.D:
        raise InvalidArgument("anisotropy dimension must match the cylinder")
    if n_samples < 1:
        raise InvalidArgument("n_samples must be positive")
    if M is None:
        M = parabolic_boundary(cyl, [spacing] * d + [spacing**2])
    h = max(M.spacing[:-1]) if M.spacing else 0.0
    rng = np.random.default_rng(seed)
    lo = np.array([b[0] for b in cyl.box])
    hi = np.array([b[1] for b in cyl.box])
    kept_r, kept_d = [], []
    total = 0
    for _ in range(1000):
        if total >= n_samples:
            break
        cand = lo + (hi - lo) * rng.random((max(2 * (n_samples - total), 64), cyl.D))
        cand = cand[cyl.contains(cand, closed=False)]
        dl = M.min_parabolic(cand)
        ok = dl >= margin * h
        cand, dl = cand[ok][: n_samples - total], dl[ok][: n_samples - total]
        kept_r.append(M.min_aniso(cand, aniso))
        kept_d.append(dl)
        total += len(cand)
    if total < n_samples:
        raise InvalidArgument("margin leaves no admissible probe points")
    r = np.minimum(1.0, np.concatenate(kept_r))
    w = np.minimum(1.0, np.concatenate(kept_d) ** ((d + 2) / d))
    ratio = r / w
    return ProbeStats(float(ratio.min()), float(ratio.max()), float(np.median(ratio)), int(len(ratio)))
