"""Best N-term versus uniform approximation and adaptivity-scale regularity."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from .anisotropy import adaptivity_tau
from .errors import InvalidArgument
from .norms import _lp
from .transform import CoefficientTree, inverse, zeros_like

FLOOR = 1e-12


@dataclass
class RateCurve:
    N: np.ndarray
    error: np.ndarray
    raw_error: np.ndarray | None = None
    kind: str = "nterm"
    p: float = 2.0
    fit: dict = field(default_factory=dict)

    def __post_init__(self):
        self.N = np.asarray(self.N, dtype=np.int64)
        self.error = np.asarray(self.error, dtype=float)
        if self.raw_error is None:
            self.raw_error = self.error.copy()
        if len(self.N) != len(self.error):
            raise InvalidArgument("N and error lengths differ")
        if np.any(np.diff(self.N) <= 0):
            raise InvalidArgument("N must be strictly increasing")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind, "p": self.p, "N": self.N.tolist(), "error": self.error.tolist(),
            "raw_error": np.asarray(self.raw_error).tolist(), "fit": self.fit,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["N", "error"])
            for n, e in zip(self.N, self.error):
                w.writerow([int(n), format(float(e), ".17g")])


def _flat_coefficients(tree: CoefficientTree):
    """Values, p-weights' level factor and a lexicographic key for every coefficient.

    The coarse block sorts first as level ``-1``.
    """
    vals, lev, band_rank, pos, where = [], [], [], [], []
    c = tree.coarse()
    vals.append(c.ravel())
    lev.append(np.full(c.size, -1))
    band_rank.append(np.zeros(c.size, dtype=np.int64))
    pos.append(np.arange(c.size))
    where.append((None, None))
    bands = tree.bands()
    for j in range(tree.J):
        for r, u in enumerate(bands):
            b = tree.band(j, u)
            vals.append(b.ravel())
            lev.append(np.full(b.size, j))
            band_rank.append(np.full(b.size, r + 1, dtype=np.int64))
            pos.append(np.arange(b.size))
            where.append((j, u))
    return vals, lev, band_rank, pos, where


def _scatter(tree: CoefficientTree, where, keep_parts) -> CoefficientTree:
    out = zeros_like(tree)
    for (j, u), kp in zip(where, keep_parts):
        if j is None:
            view = out.coeffs[tuple(slice(0, n) for n in tree.coarse_shape)]
            src = tree.coarse()
        else:
            view = out.band(j, u)
            src = tree.band(j, u)
        flat = np.where(kp.reshape(src.shape), src, 0.0)
        view[...] = flat
    return out


def _lp_error(tree: CoefficientTree, approx: CoefficientTree, p: float, ref: np.ndarray | None = None) -> float:
    if ref is None:
        ref = inverse(tree).data
    g = inverse(approx)
    return _lp(ref - g.data, p, g.cell_volume)


def default_Ns(tree: CoefficientTree, count: int = 24) -> list[int]:
    total = tree.coeffs.size
    start = max(1, int(np.prod(tree.coarse_shape)))
    return sorted({int(round(v)) for v in np.geomspace(start, total, count)})


def nterm_order(tree: CoefficientTree, p: float) -> np.ndarray:
    """Selection order: p-weighted magnitude descending, ties by (level, band, position)."""
    vals, lev, band_rank, pos, _ = _flat_coefficients(tree)
    v = np.abs(np.concatenate(vals))
    L = np.concatenate(lev)
    w = v * float(tree.det_m) ** (np.maximum(L, 0) * (0.5 - 1.0 / p))
    # lexsort: last key is primary
    return np.lexsort((np.concatenate(pos), np.concatenate(band_rank), L, -w))


def nterm_error_curve(tree: CoefficientTree, Ns: Sequence[int] | None = None, p: float = 2.0) -> RateCurve:
    """Error of keeping the ``N`` largest coefficients by ``m**(j(1/2-1/p)) |c|``.

    The weight ranks ``L_p`` contributions exactly for ``p = 2`` and is the
    usual surrogate otherwise.  ``error`` is the running minimum over ``N``
    (fewer terms are still an admissible ``N``-term approximation);
    ``raw_error`` keeps the measured values.
    """
    if p <= 0:
        raise InvalidArgument("p must be positive")
    Ns = default_Ns(tree) if Ns is None else sorted(int(n) for n in Ns)
    total = tree.coeffs.size
    if Ns and (Ns[0] < 0 or Ns[-1] > total):
        raise InvalidArgument(f"N must lie in [0, {total}]")
    vals, _, _, _, where = _flat_coefficients(tree)
    sizes = [v.size for v in vals]
    order = nterm_order(tree, p)
    ref = inverse(tree).data
    raw = []
    for N in Ns:
        keep = np.zeros(total, dtype=bool)
        keep[order[:N]] = True
        parts = np.split(keep, np.cumsum(sizes)[:-1])
        raw.append(_lp_error(tree, _scatter(tree, where, parts), p, ref))
    raw = np.array(raw)
    return RateCurve(Ns, np.minimum.accumulate(raw), raw, "nterm", p)


def uniform_stages(tree: CoefficientTree) -> list[tuple[int, tuple[int, ...]]]:
    """Refinement stages ``(level, cutoffs)`` from the coarse block to the full tree.

    At a stage, band ``(j, u)`` is kept when ``j`` is below the stage level,
    or equal to it with ``u_i == 0 or u_i >= cutoff_i`` on every axis.  Each
    stage adds one dyadic substep along one axis, so every stage is a
    tensor-product space.
    """
    b = tree.b
    stages = []
    for j in range(tree.J):
        cut = [bi + 1 for bi in b]
        stages.append((j, tuple(cut)))
        for i, bi in enumerate(b):
            for s in range(bi, 0, -1):
                cut[i] = s
                stages.append((j, tuple(cut)))
    return stages


def _stage_keeps(j_band: int, u, stage) -> bool:
    js, cut = stage
    if j_band < js:
        return True
    if j_band > js:
        return False
    return all(t == 0 or t >= c for t, c in zip(u, cut))


def uniform_error_curve(tree: CoefficientTree, p: float = 2.0) -> RateCurve:
    """Error of linear truncation at every tensor-product refinement stage."""
    vals, _, _, _, where = _flat_coefficients(tree)
    ref = inverse(tree).data
    Ns, errs = [], []
    seen = set()
    for stage in uniform_stages(tree):
        parts = []
        for (j, u), v in zip(where, vals):
            keep = True if j is None else _stage_keeps(j, u, stage)
            parts.append(np.full(v.size, keep))
        N = int(sum(int(k.sum()) for k in parts))
        if N in seen:
            continue
        seen.add(N)
        Ns.append(N)
        errs.append(_lp_error(tree, _scatter(tree, where, parts), p, ref))
    errs = np.array(errs)
    return RateCurve(Ns, np.minimum.accumulate(errs), errs, "uniform", p)


@dataclass
class RateFit:
    exponent: float
    stderr: float
    residual: float
    window: tuple[int, int]
    points: int

    def to_dict(self) -> dict:
        return {
            "exponent": self.exponent, "stderr": self.stderr, "residual": self.residual,
            "window": list(self.window), "points": self.points,
        }


def fit_rate(curve: RateCurve, window: tuple[float, float] | None = None, drop=(0.25, 0.10)) -> RateFit:
    """Least-squares slope of ``-log error`` against ``log N``.

    ``window`` restricts ``N`` to ``[lo, hi]``; without it the smallest 25%
    and largest 10% of the points are dropped.  Errors at the rounding
    floor are ignored.  Needs at least four points and nonincreasing data.
    """
    N = curve.N.astype(float)
    e = np.asarray(curve.error, dtype=float)
    scale = float(np.max(np.abs(e), initial=0.0))
    if scale == 0 or not np.all(np.isfinite(e)):
        raise InvalidArgument("degenerate curve: all errors vanish or are not finite")
    if np.any(np.diff(e) > 1e-12 * scale):
        raise InvalidArgument("errors must be nonincreasing in N")
    ok = (e > FLOOR * scale) & (N > 0)
    N, e = N[ok], e[ok]
    if window is not None:
        sel = (N >= window[0]) & (N <= window[1])
    else:
        n = len(N)
        lo, hi = int(math.floor(drop[0] * n)), int(math.floor(drop[1] * n))
        sel = np.zeros(n, dtype=bool)
        sel[lo : n - hi] = True
    N, e = N[sel], e[sel]
    if len(N) < 4:
        raise InvalidArgument(f"need at least 4 points in the fit window, got {len(N)}")
    if np.ptp(np.log(e)) == 0:
        raise InvalidArgument("degenerate curve: error is flat over the fit window")
    res = stats.linregress(np.log(N), np.log(e))
    pred = res.intercept + res.slope * np.log(N)
    rms = float(np.sqrt(np.mean((np.log(e) - pred) ** 2)))
    fit = RateFit(float(-res.slope), float(res.stderr), rms, (int(N[0]), int(N[-1])), int(len(N)))
    curve.fit = fit.to_dict()
    return fit


# adaptivity-scale regularity


def adaptivity_level_terms(tree: CoefficientTree, r: float, p: float) -> np.ndarray:
    """``T_j = m**(j (1/2 - 1/p) tau) sum_level |c|**tau`` for each level."""
    tau = float(adaptivity_tau(r, p, tree.aniso.norm_sum))
    m = float(tree.det_m)
    out = np.empty(tree.J)
    for j in range(tree.J):
        v = np.abs(tree.level_values(j))
        out[j] = m ** (j * (0.5 - 1.0 / p) * tau) * np.sum(v**tau)
    return out


def _tail_slope(T: np.ndarray, levels: Sequence[int]) -> float:
    x = np.array(levels, dtype=float)
    y = np.log(np.maximum(T[list(levels)], 1e-300))
    if len(x) == 1:
        return 0.0
    return float(np.polyfit(x, y, 1)[0])


@dataclass
class RegularityEstimate:
    r_hat: float
    interval: tuple[float, float]
    converged: bool
    levels: list
    nterm_r: float | None
    params: dict

    def to_dict(self) -> dict:
        return {
            "r_hat": self.r_hat, "interval": list(self.interval), "converged": self.converged,
            "levels": self.levels, "nterm_r": self.nterm_r, "params": self.params,
        }


def regularity_estimate(
    tree: CoefficientTree, p: float = 2.0, levels: Sequence[int] | None = None,
    r_max: float | None = None, tol: float = 1e-6, max_steps: int = 30, nterm: RateCurve | None = None,
) -> RegularityEstimate:
    """Largest ``r`` whose adaptivity norm stays stable as levels are added.

    ``r`` is stable when the per-level terms ``T_j`` of the adaptivity norm
    do not grow across ``levels`` (least-squares slope of ``log T_j`` at
    most zero); the default uses the finer half of the levels, at least
    two.  Bisection over ``[0, r_max]``; without convergence after
    ``max_steps`` halvings the bracketing interval is reported.
    """
    J = tree.J
    if J < 2:
        raise InvalidArgument("regularity estimate needs at least two levels")
    ns = float(tree.aniso.norm_sum)
    if levels is None:
        k = max(2, J // 2)
        levels = list(range(J - k, J))
    levels = [int(j) for j in levels]
    if any(not 0 <= j < J for j in levels):
        raise InvalidArgument("levels out of range")
    if not np.any(np.abs(tree.coeffs) > 0):
        raise InvalidArgument("degenerate tree: all coefficients vanish")
    r_max = 4.0 * ns if r_max is None else float(r_max)

    nr = None
    if nterm is not None:
        try:
            nr = ns * fit_rate(nterm).exponent
        except InvalidArgument:
            nr = None

    def stable(r):
        return _tail_slope(adaptivity_level_terms(tree, r, p), levels) <= 0.0

    lo, hi = 0.0, r_max
    if not stable(lo):
        lo_r = (0.0, 0.0)
        return RegularityEstimate(0.0, lo_r, True, levels, nr, {"p": p, "note": "unstable at r = 0"})
    if stable(hi):
        return RegularityEstimate(hi, (hi, math.inf), False, levels, nr, {"p": p, "note": "stable up to r_max"})
    steps = 0
    while hi - lo > tol and steps < max_steps:
        mid = 0.5 * (lo + hi)
        if stable(mid):
            lo = mid
        else:
            hi = mid
        steps += 1
    converged = hi - lo <= tol
    return RegularityEstimate(0.5 * (lo + hi), (lo, hi), converged, levels, nr, {"p": p, "r_max": r_max})


def synthetic_tree(template: CoefficientTree, theta: float, kappa: float, seed: int = 0) -> CoefficientTree:
    """Tree with about ``m**(j theta)`` coefficients of size ``m**(-j kappa)`` on level ``j``.

    Positions are drawn without replacement from each level.  The
    adaptivity norm is finite exactly for
    ``r < N_s ((kappa - 1/2 + 1/p)/theta - 1/p)``.  Level counts are
    exact, and ``synthetic_r`` exact, when ``m**theta`` is an integer.
    """
    rng = np.random.default_rng(seed)
    t = zeros_like(template)
    m = float(t.det_m)
    bands = t.bands()
    for j in range(t.J):
        sizes = [t.band(j, u).size for u in bands]
        total = sum(sizes)
        n = min(total, max(1, int(round(m ** (j * theta)))))
        pick = np.zeros(total, dtype=bool)
        pick[rng.choice(total, size=n, replace=False)] = True
        parts = np.split(pick, np.cumsum(sizes)[:-1])
        for u, kp in zip(bands, parts):
            view = t.band(j, u)
            view[...] = np.where(kp.reshape(view.shape), m ** (-j * kappa), 0.0)
    return t


def synthetic_r(theta: float, kappa: float, p: float, norm_sum) -> float:
    ns = float(norm_sum)
    return ns * ((kappa - 0.5 + 1.0 / p) / theta - 1.0 / p)
