"""Wavelet-side and grid-side norm evaluators.

Grid integrals use the midpoint rule on cells; derivatives are second-order
finite differences with one-sided stencils at the edges.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from fractions import Fraction
from typing import Sequence

import numpy as np

from .anisotropy import Anisotropy, adaptivity_tau, as_fraction
from .errors import InvalidArgument
from .geometry import SingularSet, rho_a
from .grid import Grid
from .transform import CoefficientTree, level_energy


@dataclass
class NormReport:
    value: float
    levels: list = field(default_factory=list)
    params: dict = field(default_factory=dict)
    terms: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"value": self.value, "levels": list(self.levels), "params": dict(self.params), "terms": dict(self.terms)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _lp(values: np.ndarray, p: float, weight: float = 1.0) -> float:
    v = np.abs(np.asarray(values, dtype=float)).ravel()
    if v.size == 0:
        return 0.0
    if p == math.inf:
        return float(v.max())
    return float((weight * np.sum(v**p)) ** (1.0 / p))


# wavelet side


def besov_wavelet_norm(tree: CoefficientTree, alpha: float, p: float, q: float, seminorm: bool = False) -> NormReport:
    """Sequence-space norm: coarse ``l_p`` part plus weighted level sums.

    Level ``j`` carries the weight ``m**(j (alpha/N_s + 1/2 - 1/p))`` with
    ``m = |det M|``.
    """
    ns = float(tree.aniso.norm_sum)
    if not (0 < p < math.inf and 0 < q < math.inf):
        raise InvalidArgument(f"p and q must lie in (0, inf), got p={p}, q={q}")
    bound = max(0.0, ns * (1.0 / p - 1.0))
    if not alpha > bound:
        raise InvalidArgument(f"alpha must exceed max(0, N_s (1/p - 1)) = {bound:.6g}, got {alpha}")
    m = tree.det_m
    beta = alpha / ns + 0.5 - 1.0 / p
    S = level_energy(tree, p)
    terms = [float(m ** (j * beta) * S[j]) for j in range(tree.J)]
    detail = float(np.sum(np.asarray(terms) ** q) ** (1.0 / q)) if terms else 0.0
    coarse = 0.0 if seminorm else _lp(tree.coarse(), p)
    return NormReport(
        coarse + detail,
        terms,
        {"alpha": alpha, "p": p, "q": q, "seminorm": seminorm},
        {"coarse": coarse, "detail": detail},
    )


def adaptivity_norm(tree: CoefficientTree, r: float, p: float) -> NormReport:
    """Norm of the adaptivity scale with ``1/tau = r/N_s + 1/p``."""
    if r < 0 or p <= 0:
        raise InvalidArgument(f"need r >= 0 and p > 0, got r={r}, p={p}")
    tau = float(adaptivity_tau(r, p, tree.aniso.norm_sum))
    m = tree.det_m
    w = 0.5 - 1.0 / p
    S = level_energy(tree, tau)
    terms = [float(m ** (j * w) * S[j]) for j in range(tree.J)]
    detail = float(np.sum(np.asarray(terms) ** tau) ** (1.0 / tau)) if terms else 0.0
    coarse = _lp(tree.coarse(), tau)
    return NormReport(coarse + detail, terms, {"r": r, "p": p, "tau": tau}, {"coarse": coarse, "detail": detail})


# finite differences


def derivative(f: np.ndarray, axis: int, order: int, h: float) -> np.ndarray:
    """Second-order accurate derivative of any order along ``axis``."""
    f = np.asarray(f, dtype=float)
    n = f.shape[axis]
    if order == 0:
        return f.copy()
    if n < order + 2:
        raise InvalidArgument(f"axis {axis}: {n} samples cannot support a derivative of order {order}")
    if order == 1:
        return np.gradient(f, h, axis=axis, edge_order=2)
    if order == 2:
        g = np.moveaxis(f, axis, 0)
        out = np.empty_like(g)
        out[1:-1] = g[2:] - 2 * g[1:-1] + g[:-2]
        out[0] = 2 * g[0] - 5 * g[1] + 4 * g[2] - g[3]
        out[-1] = 2 * g[-1] - 5 * g[-2] + 4 * g[-3] - g[-4]
        return np.moveaxis(out / h**2, 0, axis)
    # direct stencils: central inside, one-sided with order + 2 points near the edges
    g = np.moveaxis(f, axis, 0)
    out = np.empty_like(g)
    half = (order + 1) // 2
    centre = tuple(range(-half, half + 1))
    out[half : n - half] = sum(w * g[half + o : n - half + o] for o, w in zip(centre, _fd_weights(centre, order)))
    width = order + 2
    for i in list(range(half)) + list(range(n - half, n)):
        first = min(max(i - half, 0), n - width) - i
        offs = tuple(range(first, first + width))
        out[i] = sum(w * g[i + o] for o, w in zip(offs, _fd_weights(offs, order)))
    return np.moveaxis(out / h**order, 0, axis)


@lru_cache(maxsize=64)
def _fd_weights(offsets: tuple[int, ...], order: int) -> tuple[float, ...]:
    """Weights of the unique stencil on ``offsets`` exact for degree < len(offsets)."""
    k = len(offsets)
    rows = [[Fraction(o) ** i for o in offsets] + [Fraction(math.factorial(order) if i == order else 0)] for i in range(k)]
    for c in range(k):
        piv = next(r for r in range(c, k) if rows[r][c] != 0)
        rows[c], rows[piv] = rows[piv], rows[c]
        rows[c] = [v / rows[c][c] for v in rows[c]]
        for r in range(k):
            if r != c and rows[r][c] != 0:
                rows[r] = [a - rows[r][c] * b for a, b in zip(rows[r], rows[c])]
    return tuple(float(r[-1]) for r in rows)


def _check_stencil(g: Grid, orders: Sequence[int]):
    for i, (n, l) in enumerate(zip(g.dims, orders)):
        if l > 0 and n < l + 2:
            raise InvalidArgument(f"axis {i}: {n} samples cannot support a derivative of order {l}")


def aniso_sobolev_norm(g: Grid, l_vec: Sequence[int], p: float) -> NormReport:
    """``||f||_p + sum_i ||d^{l_i} f / dx_i^{l_i}||_p``."""
    if len(l_vec) != g.D:
        raise InvalidArgument(f"need {g.D} derivative orders, got {len(l_vec)}")
    if any(int(l) != l or l < 0 for l in l_vec):
        raise InvalidArgument("derivative orders must be nonnegative integers")
    _check_stencil(g, l_vec)
    vol = g.cell_volume
    h = g.spacing
    base = _lp(g.data, p, vol)
    parts = [_lp(derivative(g.data, i, int(l), h[i]), p, vol) for i, l in enumerate(l_vec)]
    return NormReport(base + sum(parts), [], {"l": list(map(int, l_vec)), "p": p}, {"base": base, "axes": parts})


def w21_norm(g: Grid, p: float, include_mixed: bool = True) -> NormReport:
    """Parabolic Sobolev norm on a space-time grid (time is the last axis).

    Second spatial derivatives run over ordered pairs ``(i, j)``, so each
    mixed derivative appears twice.
    """
    if g.D < 2:
        raise InvalidArgument("a space-time grid needs at least two axes")
    d = g.D - 1
    _check_stencil(g, [2] * d + [1])
    vol = g.cell_volume
    h = g.spacing
    u = g.data
    base = _lp(u, p, vol)
    first = [derivative(u, i, 1, h[i]) for i in range(d)]
    grad = sum(_lp(v, p, vol) for v in first)
    pure = sum(_lp(derivative(u, i, 2, h[i]), p, vol) for i in range(d))
    mixed = 0.0
    if include_mixed:
        for i in range(d):
            for j in range(d):
                if i != j:
                    mixed += _lp(derivative(first[i], j, 1, h[j]), p, vol)
    dt = _lp(derivative(u, d, 1, h[d]), p, vol)
    total = base + grad + pure + mixed + dt
    return NormReport(
        total, [], {"p": p, "include_mixed": include_mixed},
        {"base": base, "gradient": grad, "pure_second": pure, "mixed_second": mixed, "time": dt},
    )


def kondratiev_orders(m, aniso: Anisotropy) -> tuple[int, ...]:
    """Per-axis top orders ``m_i = m a_i``; each must be a nonnegative integer."""
    mf = as_fraction(m)
    out = []
    for i, ai in enumerate(aniso.a):
        mi = mf * ai
        if mi.denominator != 1 or mi < 0:
            raise InvalidArgument(f"axis {i}: m * a_i = {mi} is not a nonnegative integer")
        out.append(int(mi))
    return tuple(out)


def rho_field(g: Grid, M: SingularSet, aniso: Anisotropy) -> np.ndarray:
    return rho_a(g.points(), M, aniso).reshape(g.dims)


def kondratiev_norm(
    g: Grid, m, aniso: Anisotropy, gamma: float, p: float, M: SingularSet | None = None,
    seminorm_only: bool = False, classical_weights: bool = False, rho: np.ndarray | None = None,
    margin: Sequence[int] | None = None,
) -> NormReport:
    """Weighted Sobolev norm with weight ``rho_a**(m - gamma)``.

    The undifferentiated term enters once.  ``classical_weights`` switches
    the exponent of the order-``k`` derivative along axis ``i`` to
    ``k / a_i - gamma``.  ``margin`` excludes that many cells per axis at
    each end from the quadrature.
    """
    orders = kondratiev_orders(m, aniso)
    if p < 1:
        raise InvalidArgument(f"p must be >= 1, got {p}")
    if g.D != aniso.D:
        raise InvalidArgument("grid and anisotropy dimensions differ")
    _check_stencil(g, orders)
    if rho is None:
        if M is None:
            raise InvalidArgument("a singular set or a precomputed weight field is required")
        rho = rho_field(g, M, aniso)
    rho = np.asarray(rho, dtype=float)
    mf = float(as_fraction(m))
    vol = g.cell_volume
    h = g.spacing
    inner = tuple(slice(k, n - k) for k, n in zip(margin or [0] * g.D, g.dims))
    a = aniso.a_float

    def weighted(arr, expo):
        w = rho[inner] ** expo if expo != 0 else 1.0
        return float(vol * np.sum(np.abs(w * arr[inner]) ** p))

    total = 0.0
    per_axis = []
    if not seminorm_only:
        total += weighted(g.data, (0.0 if classical_weights else mf) - gamma)
    for i, mi in enumerate(orders):
        acc = 0.0
        ks = [mi] if seminorm_only else range(1, mi + 1)
        for k in ks:
            if k == 0:
                continue
            expo = (k / a[i] if classical_weights else mf) - gamma
            acc += weighted(derivative(g.data, i, k, h[i]), expo)
        per_axis.append(acc ** (1.0 / p))
        total += acc
    return NormReport(
        float(total ** (1.0 / p)), [],
        {"m": str(as_fraction(m)), "gamma": gamma, "p": p, "seminorm_only": seminorm_only,
         "classical_weights": classical_weights, "orders": list(orders)},
        {"axes": per_axis},
    )


# difference-based seminorm


def modulus_besov_seminorm(
    g: Grid, alpha_vec: Sequence[float], p: float, q: float, k_vec: Sequence[int]
) -> NormReport:
    """``sum_i (int_0^inf (t**-alpha_i w_i(t))**q dt/t)**(1/q)`` on dyadic ``t``.

    ``w_i(t)`` is the ``L_p`` norm of the order-``k_i`` difference with step
    ``t e_i``, set to zero wherever the stencil leaves the box.  Steps are
    ``t = h_i 2**l`` and the ``dt/t`` integral is a dyadic Riemann sum.
    """
    if len(alpha_vec) != g.D or len(k_vec) != g.D:
        raise InvalidArgument(f"need {g.D} smoothness values and difference orders")
    for i, (al, k) in enumerate(zip(alpha_vec, k_vec)):
        if int(k) != k or k <= al:
            raise InvalidArgument(f"axis {i}: difference order {k} must be an integer exceeding alpha_i = {al}")
    vol = g.cell_volume
    h = g.spacing
    total = 0.0
    per_axis = []
    for i, (al, k) in enumerate(zip(alpha_vec, k_vec)):
        k = int(k)
        n = g.dims[i]
        x = np.moveaxis(g.data, i, 0)
        acc = 0.0
        ell = 0
        while k * (1 << ell) < n:
            s = 1 << ell
            diff = np.zeros_like(x[: n - k * s])
            for r in range(k + 1):
                diff += (-1) ** (k - r) * math.comb(k, r) * x[r * s : n - k * s + r * s]
            w = _lp(diff, p, vol)
            t = h[i] * s
            acc += math.log(2.0) * (t ** (-al) * w) ** q
            ell += 1
        per_axis.append(acc ** (1.0 / q))
        total += acc ** (1.0 / q)
    return NormReport(total, [], {"alpha": list(alpha_vec), "p": p, "q": q, "k": list(map(int, k_vec))}, {"axes": per_axis})
