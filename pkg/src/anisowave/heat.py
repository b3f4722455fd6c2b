"""Temperatures on space-time cylinders and the weighted gradient estimate.

Grids over a cylinder keep time as the last axis and sample cell centres,
so no sample sits on the parabolic boundary itself.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .anisotropy import heat_anisotropy, mean_smoothness_convert
from .errors import InvalidArgument, ResidualTooLarge
from .filters import BiorthFilterBank, make_spline_filters
from .geometry import Cylinder, SingularSet, parabolic_boundary, parabolic_delta
from .grid import Grid, load_grid, save_grid
from .norms import _lp, besov_wavelet_norm, derivative
from .transform import forward

PROVENANCES = ("exact_kernel", "fourier_series", "crank_nicolson")
KINDS = ("sine_mode", "gaussian_kernel", "incompatible_step")
SERIES_TERMS = 200


@dataclass
class Temperature:
    grid: Grid
    cyl: Cylinder
    provenance: str
    residual: float
    tolerance: float
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise InvalidArgument(f"unknown provenance {self.provenance!r}")

    @property
    def d(self) -> int:
        return self.cyl.d

    def check(self) -> "Temperature":
        if not self.residual <= self.tolerance:
            raise ResidualTooLarge(
                f"heat residual {self.residual:.3g} exceeds tolerance {self.tolerance:.3g} ({self.provenance})"
            )
        return self

    def sidecar(self) -> dict:
        return {
            "provenance": self.provenance,
            "residual": self.residual,
            "tolerance": self.tolerance,
            "cylinder": self.cyl.to_json(),
            "params": self.params,
        }


def save_temperature(u: Temperature, path) -> None:
    save_grid(u.grid, path)
    with open(str(path) + ".json", "w") as fh:
        json.dump(u.sidecar(), fh, indent=2, sort_keys=True)


def load_temperature(path) -> Temperature:
    g = load_grid(path)
    with open(str(path) + ".json") as fh:
        meta = json.load(fh)
    c = meta["cylinder"]
    cyl = Cylinder(tuple(c["lo"]), tuple(c["hi"]), c["T"], c.get("shape", "box"))
    return Temperature(g, cyl, meta["provenance"], meta["residual"], meta["tolerance"], meta.get("params", {}))


def _mesh(cyl: Cylinder, dims):
    if len(dims) != cyl.D:
        raise InvalidArgument(f"need {cyl.D} grid sizes, got {len(dims)}")
    g = Grid.zeros(dims, cyl.box)
    return g, np.meshgrid(*g.coords(), indexing="ij")


# exact temperatures; each returns value, time derivative and Laplacian


def _sine(x, t, cyl, k):
    ws = [math.pi * k[i] / (cyl.hi[i] - cyl.lo[i]) for i in range(len(x))]
    decay = np.exp(-sum(w * w for w in ws) * t)
    sines = [np.sin(w * (xi - lo)) for w, xi, lo in zip(ws, x, cyl.lo)]
    u = decay * np.prod(sines, axis=0)
    ut = -sum(w * w for w in ws) * u
    # Laplacian term by term from the factors
    lap = np.zeros_like(u)
    for i, w in enumerate(ws):
        others = np.prod([s for k2, s in enumerate(sines) if k2 != i], axis=0) if len(ws) > 1 else 1.0
        lap += decay * (-w * w * sines[i]) * others
    return u, ut, lap


def _gauss(x, t, x0, t0):
    d = len(x)
    s = t + t0
    r2 = sum((xi - ci) ** 2 for xi, ci in zip(x, x0))
    u = (4 * math.pi * s) ** (-d / 2) * np.exp(-r2 / (4 * s))
    ut = u * (r2 / (4 * s * s) - d / (2 * s))
    lap = sum(u * ((xi - ci) ** 2 / (4 * s * s) - 1 / (2 * s)) for xi, ci in zip(x, x0))
    return u, ut, lap


def _step_factor(xi, t, L, lo, terms):
    # 1D solution with unit initial data and zero boundary values
    v = np.zeros(np.broadcast(xi, t).shape)
    vt = np.zeros_like(v)
    vxx = np.zeros_like(v)
    for k in range(1, 2 * terms, 2):
        w = k * math.pi / L
        amp = 4.0 / (k * math.pi)
        s = np.sin(w * (xi - lo))
        e = np.exp(-w * w * t)
        v += amp * s * e
        vt += amp * s * (-w * w * e)
        vxx += amp * (-w * w * s) * e
    return v, vt, vxx


def step_tail_bound(L: float, t_min: float, terms: int = SERIES_TERMS) -> float:
    """Bound on the dropped 1D series terms for ``t >= t_min``.

    With ``K = 2 terms + 1`` the odd modes ``K + 2i`` decay at least
    geometrically with ratio ``exp(-4 K pi^2 t / L^2)``.
    """
    if t_min <= 0:
        return math.inf
    K = 2 * terms + 1
    head = 4.0 / (K * math.pi) * math.exp(-((K * math.pi / L) ** 2) * t_min)
    q = math.exp(-4 * K * math.pi**2 * t_min / L**2)
    return head / (1.0 - q)


def exact_temperature(kind: str, cyl: Cylinder, dims, **params) -> Temperature:
    """Sample an exact temperature on the cylinder at cell centres.

    ``sine_mode``: ``exp(-|w|^2 t) prod sin(w_i (x_i - lo_i))`` with mode
    numbers ``k``.  ``gaussian_kernel``: heat kernel centred at ``x0`` and
    shifted by ``t0 > 0`` in time.  ``incompatible_step``: unit initial data
    with zero lateral values as a truncated sine series (``terms`` odd
    modes per axis).  The residual is evaluated from the analytic
    derivatives of what is sampled.
    """
    if kind not in KINDS:
        raise InvalidArgument(f"unknown temperature kind {kind!r}; expected one of {KINDS}")
    if cyl.shape != "box":
        raise InvalidArgument("exact temperatures are available on box cylinders only")
    g, mesh = _mesh(cyl, dims)
    x, t = mesh[:-1], mesh[-1]
    d = cyl.d
    if kind == "sine_mode":
        k = tuple(int(v) for v in params.get("k", (1,) * d))
        if len(k) != d or any(v < 1 for v in k):
            raise InvalidArgument("mode numbers must be d positive integers")
        u, ut, lap = _sine(x, t, cyl, k)
        prov, tol, echo, bound = "exact_kernel", 1e-8, {"k": list(k)}, 0.0
    elif kind == "gaussian_kernel":
        x0 = tuple(float(v) for v in params.get("x0", cyl.mid))
        t0 = float(params.get("t0", 0.1))
        if len(x0) != d:
            raise InvalidArgument("kernel centre must have d coordinates")
        if t0 <= 0:
            raise InvalidArgument(f"time shift t0 must be positive to keep the kernel singularity outside the closed cylinder, got {t0}")
        u, ut, lap = _gauss(x, t, x0, t0)
        prov, tol, echo, bound = "exact_kernel", 1e-8, {"x0": list(x0), "t0": t0}, 0.0
    else:
        terms = int(params.get("terms", SERIES_TERMS))
        if terms < 1:
            raise InvalidArgument("need at least one series term")
        facs = [_step_factor(xi, t, cyl.hi[i] - cyl.lo[i], cyl.lo[i], terms) for i, xi in enumerate(x)]
        u = np.prod([f[0] for f in facs], axis=0)
        lap = np.zeros_like(u)
        ut = np.zeros_like(u)
        for i in range(d):
            others = np.prod([facs[k2][0] for k2 in range(d) if k2 != i], axis=0) if d > 1 else 1.0
            lap += facs[i][2] * others
            ut += facs[i][1] * others
        t_min = float(g.axis_coords(d)[0])
        bound = max(step_tail_bound(cyl.hi[i] - cyl.lo[i], t_min, terms) for i in range(d))
        prov, tol, echo = "fourier_series", 1e-8, {"terms": terms}
    scale = max(float(np.max(np.abs(lap))), float(np.max(np.abs(ut))), 1.0)
    res = float(np.max(np.abs(ut - lap))) / scale
    echo = dict(echo, kind=kind, tail_bound=bound)
    return Temperature(g.with_data(u), cyl, prov, res, tol, echo)


def discrete_residual(u: Temperature, margin: int = 2) -> float:
    """Relative max of ``u_t - Laplace u`` by central differences, away from the edges."""
    g = u.grid
    d = u.d
    h = g.spacing
    ut = derivative(g.data, d, 1, h[d])
    lap = sum(derivative(g.data, i, 2, h[i]) for i in range(d))
    inner = tuple(slice(margin, n - margin) for n in g.dims)
    r = np.abs(ut - lap)[inner]
    scale = max(float(np.max(np.abs(lap[inner]))), 1e-300)
    return float(np.max(r)) / scale


# Crank-Nicolson


def _laplacian(cyl: Cylinder, nx):
    """Cell-centred Dirichlet Laplacian on the cells inside the spatial domain.

    Returns the matrix, the active mask, and for each boundary face the
    active cell index and the face point, so that ghost values
    ``2 g - u`` can be added on the right-hand side.
    """
    d = cyl.d
    h = np.array([(cyl.hi[i] - cyl.lo[i]) / nx[i] for i in range(d)])
    axes = [cyl.lo[i] + (np.arange(nx[i]) + 0.5) * h[i] for i in range(d)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    active = cyl.contains_spatial(mesh.reshape(-1, d), closed=True).reshape(tuple(nx))
    num = -np.ones(tuple(nx), dtype=np.int64)
    num[active] = np.arange(int(active.sum()))
    rows, cols, vals = [], [], []
    faces_cell, faces_pt, faces_w = [], [], []
    idx = np.argwhere(active)
    for ax in range(d):
        w = 1.0 / h[ax] ** 2
        for s in (-1, 1):
            nb = idx.copy()
            nb[:, ax] += s
            inside = (nb[:, ax] >= 0) & (nb[:, ax] < nx[ax])
            nbn = -np.ones(len(idx), dtype=np.int64)
            nbn[inside] = num[tuple(nb[inside].T)]
            me = num[tuple(idx.T)]
            has = nbn >= 0
            rows += [me[has], me]
            cols += [nbn[has], me]
            vals += [np.full(int(has.sum()), w), np.full(len(me), -w)]
            # missing neighbour: ghost 2g - u adds -w on the diagonal
            miss = ~has
            rows.append(me[miss])
            cols.append(me[miss])
            vals.append(np.full(int(miss.sum()), -w))
            pts = mesh[tuple(idx[miss].T)].copy()
            pts[:, ax] += s * 0.5 * h[ax]
            faces_cell.append(me[miss])
            faces_pt.append(pts)
            faces_w.append(np.full(int(miss.sum()), 2 * w))
    n = int(active.sum())
    A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    return A, active, np.concatenate(faces_cell), np.concatenate(faces_pt), np.concatenate(faces_w), mesh


def solve_heat_cn(
    cyl: Cylinder, initial, lateral_bc=0.0, nx=None, nt: int | None = None, rannacher: int = 2,
) -> Temperature:
    """Crank-Nicolson on the cell-centred grid, output at cell-centre times.

    ``initial`` is a callable ``f(*x)`` or an array over the spatial cells;
    ``lateral_bc`` a constant or a callable ``g(points, t)`` on face points.
    The first half step to ``dt/2`` is taken as ``rannacher`` backward Euler
    steps, which damps the start-up oscillation of rough initial data.
    """
    d = cyl.d
    if nx is None or nt is None:
        raise InvalidArgument("nx and nt are required")
    nx = tuple(int(v) for v in np.broadcast_to(np.asarray(nx), (d,)))
    nt = int(nt)
    if min(nx) < 2 or nt < 1:
        raise InvalidArgument("need at least 2 cells per spatial axis and 1 time step")
    A, active, fcell, fpt, fw, mesh = _laplacian(cyl, nx)
    n = A.shape[0]
    if callable(initial):
        u0 = np.asarray(initial(*np.moveaxis(mesh, -1, 0)), dtype=float)
        u0 = np.broadcast_to(u0, tuple(nx))
    else:
        u0 = np.asarray(initial, dtype=float)
        if u0.ndim == 0:
            u0 = np.full(tuple(nx), float(u0))
        if u0.shape != tuple(nx):
            raise InvalidArgument(f"initial data has shape {u0.shape}, expected {nx}")
    u = np.array(u0[active], dtype=float)

    def bvec(t):
        if callable(lateral_bc):
            gv = np.asarray(lateral_bc(fpt, t), dtype=float)
        else:
            gv = np.full(len(fcell), float(lateral_bc))
        return np.bincount(fcell, weights=fw * gv, minlength=n)

    dt = cyl.T / nt
    I = sp.identity(n, format="csc")
    out = np.zeros(tuple(nx) + (nt,))
    res = 0.0

    def solve(lu, M, rhs):
        nonlocal res
        x = lu.solve(rhs)
        r = float(np.max(np.abs(M @ x - rhs), initial=0.0)) / max(float(np.max(np.abs(rhs), initial=0.0)), 1e-300)
        res = max(res, r)
        return x

    t = 0.0
    if rannacher > 0:
        k = 0.5 * dt / rannacher
        M = (I - k * A).tocsc()
        lu = spla.splu(M)
        for _ in range(rannacher):
            t += k
            u = solve(lu, M, u + k * bvec(t))
    else:
        M = (I - 0.25 * dt * A).tocsc()
        lu = spla.splu(M)
        u = solve(lu, M, u + 0.25 * dt * (A @ u + bvec(0.0) + bvec(0.5 * dt)))
        t = 0.5 * dt
    frame = np.zeros(tuple(nx))
    frame[active] = u
    out[..., 0] = frame
    M = (I - 0.5 * dt * A).tocsc()
    P = (I + 0.5 * dt * A).tocsr()
    lu = spla.splu(M)
    for step in range(1, nt):
        t_new = (step + 0.5) * dt
        u = solve(lu, M, P @ u + 0.5 * dt * (bvec(t) + bvec(t_new)))
        t = t_new
        frame = np.zeros(tuple(nx))
        frame[active] = u
        out[..., step] = frame
    g = Grid(out, cyl.box)
    return Temperature(
        g, cyl, "crank_nicolson", res, 1e-8,
        {"nx": list(nx), "nt": nt, "rannacher": rannacher, "shape": cyl.shape},
    )


# (grad^{2,1})^n


@dataclass
class Grad21Stack:
    labels: list
    components: list
    n: int
    margin: int

    def __len__(self) -> int:
        return len(self.components)

    def length(self) -> np.ndarray:
        """Pointwise Euclidean length over all components."""
        return np.sqrt(sum(c * c for c in self.components))


def grad21_count(d: int, n: int) -> int:
    return (d * d + 1) ** n


def grad21_stack(u: Temperature, n: int) -> Grad21Stack:
    """All ``n``-fold compositions of ``(d_i d_j, d_t)``; ``(d^2+1)**n`` entries.

    Labels are tuples of factors, each ``(i, j)`` or ``"t"``.  Equal partial
    derivatives are computed once.
    """
    u.check()
    if n < 1:
        raise InvalidArgument("n must be >= 1")
    d = u.d
    g = u.grid
    need = [2 * n] * d + [n]
    for i, (N, o) in enumerate(zip(g.dims, need)):
        if N < o + 2 + 4 * n:
            raise InvalidArgument(f"axis {i}: {N} samples cannot support order-{o} differences with margin {2 * n}")
    h = g.spacing
    factors = [(i, j) for i in range(d) for j in range(d)] + ["t"]
    cache: dict = {}

    def partial(orders):
        if orders not in cache:
            f = g.data
            for ax, o in enumerate(orders):
                if o:
                    f = derivative(f, ax, o, h[ax])
            cache[orders] = f
        return cache[orders]

    labels, comps = [], []
    for combo in itertools.product(factors, repeat=n):
        orders = [0] * (d + 1)
        for f in combo:
            if f == "t":
                orders[d] += 1
            else:
                orders[f[0]] += 1
                orders[f[1]] += 1
        labels.append(combo)
        comps.append(partial(tuple(orders)))
    return Grad21Stack(labels, comps, n, 2 * n)


@dataclass
class GradientEstimate:
    lhs: float
    rhs: float
    c: float | None
    margin: int
    params: dict

    def to_dict(self) -> dict:
        return {"lhs": self.lhs, "rhs": self.rhs, "c": self.c, "margin": self.margin, "params": self.params}


def _delta_field(u: Temperature, M: SingularSet | None) -> np.ndarray:
    g = u.grid
    if M is None:
        M = parabolic_boundary(u.cyl, list(g.spacing / 4))
    return parabolic_delta(g.points(), M=M).reshape(g.dims)


def weighted_gradient_functional(
    u: Temperature, n: int, lam: float, p: float, M: SingularSet | None = None, delta: np.ndarray | None = None,
) -> float:
    """``|| delta**(2n - lam) |(grad^{2,1})^n u| ||_p`` over the interior."""
    st = grad21_stack(u, n)
    if delta is None:
        delta = _delta_field(u, M)
    inner = tuple(slice(st.margin, N - st.margin) for N in u.grid.dims)
    f = delta[inner] ** (2 * n - lam) * st.length()[inner]
    return _lp(f, p, u.grid.cell_volume)


def gradient_estimate_check(
    u: Temperature, n: int, lam: float, p: float, M: SingularSet | None = None,
    bank: BiorthFilterBank | None = None, J: int | None = None, delta: np.ndarray | None = None,
    mode: str = "symmetric",
) -> GradientEstimate:
    """Ratio of the weighted gradient functional to the parabolic Besov majorant.

    The majorant is the wavelet Besov norm of smoothness ``lam d/(d+2)``
    under the heat anisotropy.  The default symmetric boundary mode extends
    ``u`` continuously; zero padding would add a jump at the boundary and
    cap the measurable smoothness at 1/2 per axis.
    """
    u.check()
    if lam <= 0 or lam >= 2 * n + 1:
        raise InvalidArgument(f"need 0 < lambda < 2n + 1, got {lam}")
    d = u.d
    aniso = heat_anisotropy(d)
    bank = bank or make_spline_filters(2, 2)
    if J is None:
        from .embedding import max_depth

        J = max_depth(u.grid.dims, aniso, bank)
    lhs = weighted_gradient_functional(u, n, lam, p, M, delta)
    tree = forward(u.grid, bank, aniso, J, mode)
    rhs = besov_wavelet_norm(tree, float(mean_smoothness_convert(lam, d)), p, p).value
    c = lhs / rhs if rhs > 0 else None
    return GradientEstimate(lhs, rhs, c, 2 * n, {"n": n, "lambda": lam, "p": p, "J": J, "mode": mode})
