"""Biorthogonal B-spline (CDF) filter banks and single dyadic steps.

Conventions.  A filter is a coefficient array together with the integer
index of its first tap.  For one dyadic step on a signal ``x``::

    a[k] = sum_n ht[n - 2k] x[n]          (analysis lowpass)
    d[k] = sum_n gt[n - 2k] x[n]          (analysis highpass)
    x[n] = sum_k h[n - 2k] a[k] + g[n - 2k] d[k]

with ``gt[n] = (-1)**n h[1 - n]`` and ``g[n] = (-1)**n ht[1 - n]``.  The
analysis highpass therefore has ``L`` vanishing moments, where ``L`` is the
order of the synthesis B-spline.

Boundary modes act on the analysis side.  ``periodic`` wraps indices and is
inverted by the dual filters.  ``zero_pad`` drops taps outside the signal and
``symmetric`` reflects them; both are critically sampled square systems that
are inverted exactly through a cached sparse LU factorization.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from math import comb, sqrt

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import InvalidArgument

BOUNDARY_MODES = ("zero_pad", "periodic", "symmetric")


@dataclass(frozen=True)
class Filter:
    taps: np.ndarray
    start: int

    @property
    def stop(self) -> int:
        # last tap index, inclusive
        return self.start + len(self.taps) - 1

    def indices(self) -> np.ndarray:
        return np.arange(self.start, self.stop + 1)

    def to_json(self) -> dict:
        return {"start": self.start, "taps": [float(v) for v in self.taps]}


@dataclass(frozen=True, eq=False)
class BiorthFilterBank:
    """Analysis (``ht``, ``gt``) and synthesis (``h``, ``g``) filters."""

    L: int
    L_dual: int
    h: Filter
    ht: Filter
    g: Filter
    gt: Filter
    name: str = field(default="")

    @property
    def support_radius(self) -> int:
        return max(max(abs(f.start), abs(f.stop)) for f in (self.h, self.ht, self.g, self.gt))

    @property
    def max_length(self) -> int:
        return max(len(f.taps) for f in (self.h, self.ht, self.g, self.gt))

    @property
    def key(self) -> tuple[int, int]:
        return (self.L, self.L_dual)

    def phi_support(self) -> tuple[float, float]:
        """Support of the synthesis scaling function in units of its cell."""
        return float(self.h.start), float(self.h.stop)

    def dual_phi_support(self) -> tuple[float, float]:
        return float(self.ht.start), float(self.ht.stop)

    def psi_support(self) -> tuple[float, float]:
        lo, hi = self.phi_support()
        return (self.g.start + lo) / 2, (self.g.stop + hi) / 2

    def dual_psi_support(self) -> tuple[float, float]:
        lo, hi = self.dual_phi_support()
        return (self.gt.start + lo) / 2, (self.gt.stop + hi) / 2

    def to_json(self) -> str:
        obj = {
            "family": "cdf",
            "L": self.L,
            "L_dual": self.L_dual,
            "h": self.h.to_json(),
            "ht": self.ht.to_json(),
            "g": self.g.to_json(),
            "gt": self.gt.to_json(),
        }
        return json.dumps(obj, indent=2)


def _bspline(order: int) -> np.ndarray:
    taps = np.array([1.0])
    for _ in range(order):
        taps = np.convolve(taps, [0.5, 0.5])
    return taps


def _quadrature_mirror(f: Filter) -> Filter:
    # q[n] = (-1)**n f[1 - n]
    idx = f.indices()
    new_idx = 1 - idx[::-1]
    taps = np.array([(-1.0) ** (n % 2) for n in new_idx]) * f.taps[::-1]
    return Filter(taps, int(new_idx[0]))


@lru_cache(maxsize=None)
def make_spline_filters(L: int, L_dual: int) -> BiorthFilterBank:
    """CDF biorthogonal spline bank with ``L`` primal and ``L_dual`` dual moments.

    ``(1, 1)`` is Haar, ``(2, 2)`` is the 5/3 pair.
    """
    if int(L) != L or int(L_dual) != L_dual or L < 1 or L_dual < 1:
        raise InvalidArgument(f"moment orders must be positive integers, got ({L}, {L_dual})")
    if (L + L_dual) % 2:
        raise InvalidArgument(f"L + L_dual must be even, got ({L}, {L_dual})")
    L, L_dual = int(L), int(L_dual)
    K = (L + L_dual) // 2

    h = Filter(sqrt(2.0) * _bspline(L), -(L // 2))

    # remainder polynomial sum_k C(K-1+k, k) s2**k with s2 = -(z - 2 + 1/z)/4
    s2 = np.array([-0.25, 0.5, -0.25])
    poly = np.zeros(2 * K - 1)
    term = np.array([1.0])
    for k in range(K):
        off = (K - 1) - k
        poly[off : off + len(term)] += comb(K - 1 + k, k) * term
        term = np.convolve(term, s2)
    ht_taps = sqrt(2.0) * np.convolve(_bspline(L_dual), poly)
    ht = Filter(ht_taps, -(L_dual // 2) - (K - 1))

    gt = _quadrature_mirror(h)
    g = _quadrature_mirror(ht)
    return BiorthFilterBank(L, L_dual, h, ht, g, gt, name=f"cdf{L}.{L_dual}")


def biorthogonality_defect(bank: BiorthFilterBank) -> float:
    """Max deviation of the four biorthogonality identities from delta."""
    worst = 0.0
    pairs = [(bank.h, bank.ht, 1.0), (bank.g, bank.gt, 1.0), (bank.h, bank.gt, 0.0), (bank.g, bank.ht, 0.0)]
    span = bank.max_length + 2
    for f, fd, diag in pairs:
        for k in range(-span, span + 1):
            total = 0.0
            for i, v in enumerate(f.taps):
                j = f.start + i + 2 * k - fd.start
                if 0 <= j < len(fd.taps):
                    total += v * fd.taps[j]
            target = diag if k == 0 else 0.0
            worst = max(worst, abs(total - target))
    return worst


def vanishing_moment_defect(bank: BiorthFilterBank, degree: int) -> float:
    """Largest normalized moment ``|sum_n gt[n] n**q|`` over ``q <= degree``.

    Moments are taken about the filter centre and scaled by the matching
    moment of ``|gt|`` so the number is comparable across banks.
    """
    if degree < 0:
        raise InvalidArgument("degree must be >= 0")
    idx = bank.gt.indices().astype(float)
    centre = idx.mean()
    x = idx - centre
    worst = 0.0
    for q in range(degree + 1):
        mono = x**q
        scale = np.sum(np.abs(bank.gt.taps) * np.abs(mono)) or 1.0
        worst = max(worst, abs(np.sum(bank.gt.taps * mono)) / scale)
    return float(worst)


def _validate_mode(mode: str) -> str:
    if mode not in BOUNDARY_MODES:
        raise InvalidArgument(f"unknown boundary mode {mode!r}; choose from {BOUNDARY_MODES}")
    return mode


def _reflect(idx: np.ndarray, n: int, whole_sample: bool) -> np.ndarray:
    period = 2 * n - 2 if whole_sample else 2 * n
    r = np.mod(idx, period)
    if whole_sample:
        return np.where(r < n, r, period - r)
    return np.where(r < n, r, period - 1 - r)


def _filter_rows(f: Filter, n: int, mode: str, whole_sample: bool):
    """COO triplets of the decimated correlation ``y[k] = sum f[m - 2k] x[m]``."""
    half = n // 2
    k = np.repeat(np.arange(half), len(f.taps))
    m = (np.tile(f.indices(), half) + 2 * k).astype(np.int64)
    vals = np.tile(f.taps, half)
    if mode == "periodic":
        m = np.mod(m, n)
    elif mode == "symmetric":
        m = _reflect(m, n, whole_sample)
    else:
        keep = (m >= 0) & (m < n)
        k, m, vals = k[keep], m[keep], vals[keep]
    return k, m, vals


def _check_length(n: int, bank: BiorthFilterBank):
    if n % 2:
        raise InvalidArgument(f"signal length must be even, got {n}")
    if n < max(len(bank.ht.taps), len(bank.gt.taps)):
        raise InvalidArgument(
            f"signal length {n} is shorter than the analysis filters ({bank.max_length} taps)"
        )


@lru_cache(maxsize=256)
def analysis_matrix(bank: BiorthFilterBank, n: int, mode: str = "zero_pad") -> sp.csr_matrix:
    """Sparse ``n x n`` matrix mapping a signal to ``[approx; detail]``."""
    _validate_mode(mode)
    _check_length(n, bank)
    whole = bank.L % 2 == 0
    half = n // 2
    ka, ma, va = _filter_rows(bank.ht, n, mode, whole)
    kd, md, vd = _filter_rows(bank.gt, n, mode, whole)
    rows = np.concatenate([ka, kd + half])
    cols = np.concatenate([ma, md])
    vals = np.concatenate([va, vd])
    mat = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    mat.sum_duplicates()
    return mat


@lru_cache(maxsize=256)
def _periodic_synthesis_matrix(bank: BiorthFilterBank, n: int) -> sp.csr_matrix:
    half = n // 2
    ka, ma, va = _filter_rows(bank.h, n, "periodic", True)
    kd, md, vd = _filter_rows(bank.g, n, "periodic", True)
    # transpose of the correlation with the primal filters
    rows = np.concatenate([ma, md])
    cols = np.concatenate([ka, kd + half])
    vals = np.concatenate([va, vd])
    mat = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    mat.sum_duplicates()
    return mat


@lru_cache(maxsize=256)
def _lu(bank: BiorthFilterBank, n: int, mode: str):
    return spla.splu(analysis_matrix(bank, n, mode).tocsc())


def apply_analysis(x: np.ndarray, bank: BiorthFilterBank, mode: str = "zero_pad", axis: int = 0) -> np.ndarray:
    """One analysis step along ``axis``; output is ``[approx | detail]`` in place of the axis."""
    x = np.asarray(x, dtype=float)
    n = x.shape[axis]
    mat = analysis_matrix(bank, n, _validate_mode(mode))
    moved = np.moveaxis(x, axis, 0)
    out = mat @ moved.reshape(n, -1)
    return np.moveaxis(out.reshape(moved.shape), 0, axis)


def apply_synthesis(y: np.ndarray, bank: BiorthFilterBank, mode: str = "zero_pad", axis: int = 0) -> np.ndarray:
    """Exact inverse of :func:`apply_analysis` along ``axis``."""
    y = np.asarray(y, dtype=float)
    n = y.shape[axis]
    _validate_mode(mode)
    _check_length(n, bank)
    moved = np.moveaxis(y, axis, 0)
    flat = moved.reshape(n, -1)
    if mode == "periodic":
        out = _periodic_synthesis_matrix(bank, n) @ flat
    else:
        out = _lu(bank, n, mode).solve(np.ascontiguousarray(flat))
    return np.moveaxis(np.asarray(out).reshape(moved.shape), 0, axis)


def analysis_step(signal, bank: BiorthFilterBank, boundary: str = "zero_pad"):
    x = np.asarray(signal, dtype=float)
    if x.ndim != 1:
        raise InvalidArgument("analysis_step expects a 1-D signal")
    y = apply_analysis(x, bank, boundary)
    half = len(x) // 2
    return y[:half].copy(), y[half:].copy()


def synthesis_step(approx, detail, bank: BiorthFilterBank, boundary: str = "zero_pad") -> np.ndarray:
    a = np.asarray(approx, dtype=float)
    d = np.asarray(detail, dtype=float)
    if a.shape != d.shape or a.ndim != 1:
        raise InvalidArgument("approx and detail must be 1-D arrays of equal length")
    return apply_synthesis(np.concatenate([a, d]), bank, boundary)


def riesz_bounds(bank: BiorthFilterBank, n: int, mode: str = "zero_pad") -> tuple[float, float]:
    """Extreme singular values of the one-step analysis matrix."""
    s = np.linalg.svd(analysis_matrix(bank, n, mode).toarray(), compute_uv=False)
    return float(s.min()), float(s.max())
