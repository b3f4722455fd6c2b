"""Shell bookkeeping and empirical checks of the Kondratiev-to-Besov embedding.

Detail coefficients at level ``j`` are sorted by the anisotropic distance
``rho_I`` of their support hull ``Q(I)`` to the singular set: shell ``k``
holds ``k h_j <= rho_I < (k+1) h_j`` where ``h_j = max_i w_i(j)**a_i`` is
the anisotropic size of a level-``j`` cell.  ``h_j = h_0 lam**-j``, so on a
unit coarse cell this is the usual ``lam**-j`` spacing; in general the
tree level is offset by ``j0 = -log_lam(h_0)``.  Coefficients whose hull
reaches the box boundary form a separate class.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .anisotropy import Anisotropy, _num, adaptivity_tau, as_fraction, embedding_admissible
from .errors import InadmissibleParameters, InvalidArgument
from .filters import BiorthFilterBank, make_spline_filters
from .geometry import SingularSet, rho_a
from .grid import Grid
from .norms import besov_wavelet_norm, derivative, kondratiev_norm, kondratiev_orders, rho_field
from .transform import CoefficientTree, _check_divisibility, forward

BOUNDARY = -1


def max_depth(dims, aniso: Anisotropy, bank: BiorthFilterBank) -> int:
    """Largest admissible depth for the given grid shape."""
    J = 0
    while True:
        try:
            _check_divisibility(dims, aniso, J + 1, bank)
        except InvalidArgument:
            return J
        J += 1


@dataclass
class ShellPartition:
    """Per-band shell labels; ``BOUNDARY`` marks the boundary class."""

    tree: CoefficientTree
    labels: dict = field(default_factory=dict)
    rho: dict = field(default_factory=dict)
    lam: float = 1.0
    h0: float = 1.0

    @property
    def J(self) -> int:
        return self.tree.J

    @property
    def j0(self) -> float:
        """Level offset: ``h_j = lam**-(j + j0)``."""
        return -math.log(self.h0) / math.log(self.lam)

    def scale(self, j: int) -> float:
        return self.h0 * self.lam ** (-j)

    def k_bound(self, j: int) -> float:
        """``1/h_j``; since ``rho <= 1`` no shell index exceeds it."""
        return 1.0 / self.scale(j)

    def k_max(self, j: int) -> int:
        ks = [lab.max(initial=-1) for (jj, _), lab in self.labels.items() if jj == j]
        return int(max(ks))

    def counts(self, j: int) -> dict:
        """``{k: size}`` for level ``j``, with ``"boundary"`` for the boundary class."""
        out: dict = {}
        for (jj, _), lab in self.labels.items():
            if jj != j:
                continue
            ks, cs = np.unique(lab, return_counts=True)
            for k, c in zip(ks, cs):
                key = "boundary" if k == BOUNDARY else int(k)
                out[key] = out.get(key, 0) + int(c)
        return out

    def class_sizes(self) -> dict:
        out = {}
        for j in range(self.J):
            for k, c in self.counts(j).items():
                out[(j, k)] = c
        return out

    def total(self) -> int:
        return sum(lab.size for lab in self.labels.values())

    def members(self, j: int, k) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
        want = BOUNDARY if k == "boundary" else int(k)
        out = []
        for (jj, u), lab in sorted(self.labels.items()):
            if jj == j:
                out.extend((u, tuple(int(v) for v in ix)) for ix in np.argwhere(lab == want))
        return out


def _hull_samples(geo) -> np.ndarray:
    """Corners and centre of every ``Q(I)`` in a band, shape ``(n, 2**D + 1, D)``."""
    D = len(geo)
    lows = np.meshgrid(*[g.q_lo for g in geo], indexing="ij")
    highs = np.meshgrid(*[g.q_hi for g in geo], indexing="ij")
    lo = np.stack([a.ravel() for a in lows], axis=-1)
    hi = np.stack([a.ravel() for a in highs], axis=-1)
    pts = [np.where(np.array(c, dtype=bool), hi, lo) for c in itertools.product((0, 1), repeat=D)]
    pts.append(0.5 * (lo + hi))
    return np.stack(pts, axis=1)


def shell_partition(tree: CoefficientTree, M: SingularSet, aniso: Anisotropy | None = None) -> ShellPartition:
    aniso = aniso or tree.aniso
    if M.D != tree.D:
        raise InvalidArgument("singular set and tree dimensions differ")
    M.check_resolution(tree.cell_width(tree.J - 1))
    lam = aniso.schedule.lam
    h0 = float(np.max(tree.coarse_cell() ** aniso.a_float))
    part = ShellPartition(tree, lam=lam, h0=h0)
    for j, u in tree.iter_bands():
        geo = tree.band_geometry(j, u)
        shape = tuple(len(g.k) for g in geo)
        pts = _hull_samples(geo)
        r = rho_a(pts.reshape(-1, tree.D), M, aniso).reshape(pts.shape[:2]).min(axis=1).reshape(shape)
        k = np.floor(r / part.scale(j)).astype(np.int64)
        k[tree.boundary_mask(j, u)] = BOUNDARY
        part.labels[(j, u)] = k
        part.rho[(j, u)] = r
    return part


def shell_count_ratios(part: ShellPartition, delta: float, levels: Sequence[int] | None = None) -> dict:
    """``#Lambda_{j,k} / (k**(D-1-delta) h_j**-delta)`` for interior shells ``k >= 1``."""
    D = part.tree.D
    levels = range(part.J) if levels is None else levels
    out = {}
    for j in levels:
        for k, c in part.counts(j).items():
            if k == "boundary" or k < 1:
                continue
            out[(j, k)] = c / (k ** (D - 1 - delta) * part.scale(j) ** (-delta))
    return out


def fit_shell_constant(part: ShellPartition, delta: float, levels: Sequence[int] | None = None) -> float:
    """Smallest ``C`` with ``#Lambda_{j,k} <= C k**(D-1-delta) h_j**-delta`` on the given levels."""
    ratios = shell_count_ratios(part, delta, levels)
    if not ratios:
        raise InvalidArgument("no interior shells on the requested levels")
    return float(max(ratios.values()))


# coefficient-level bound


def _box_sums(w: np.ndarray, g: Grid, geo) -> np.ndarray:
    """Integrals of a cell field over every ``Q(I)`` of a band.

    Separable direct window sums; prefix-sum tables lose the small local
    integrals far from the bulk of the field to cancellation.
    """
    out = w
    for i, gi in enumerate(geo):
        lo, hi = g.box[i]
        n = g.dims[i]
        h = (hi - lo) / n
        a = np.clip(np.ceil((gi.q_lo - lo) / h - 0.5 - 1e-9), 0, n).astype(np.intp)
        b = np.clip(np.floor((gi.q_hi - lo) / h - 0.5 + 1e-9) + 1, 0, n).astype(np.intp)
        b = np.maximum(a, b)
        pad = [(0, 0)] * out.ndim
        pad[i] = (0, 1)
        x = np.pad(out, pad)
        idx = np.empty(2 * len(a), dtype=np.intp)
        idx[0::2] = a
        idx[1::2] = b
        red = np.add.reduceat(x, idx, axis=i)
        red = np.take(red, np.arange(0, 2 * len(a), 2), axis=i)
        empty = (a == b).reshape([-1 if k == i else 1 for k in range(out.ndim)])
        out = np.where(empty, 0.0, red)
    return out


@dataclass
class WhitneyReport:
    percentiles: dict
    per_level: dict
    count: int
    params: dict

    def to_dict(self) -> dict:
        return {
            "percentiles": self.percentiles,
            "per_level": {str(j): v for j, v in self.per_level.items()},
            "count": self.count,
            "params": self.params,
        }


_PCTS = (50, 90, 99, 100)


def whitney_ratios(
    tree: CoefficientTree, part: ShellPartition, g: Grid, m, gamma: float, p: float,
    rho: np.ndarray | None = None, M: SingularSet | None = None,
) -> dict:
    """Per-level arrays of ``|c_I| / (|I|**(m/N_s + 1/2 - 1/p) rho_I**(gamma - m) mu_I)``.

    ``mu_I`` is the ``L_p(Q(I))`` norm of the weighted top derivatives.
    Only interior shells ``k >= 1`` enter.  Coefficients that vanish to
    rounding get ratio zero.
    """
    aniso = tree.aniso
    orders = kondratiev_orders(m, aniso)
    mf = float(as_fraction(m))
    ns = float(aniso.norm_sum)
    if rho is None:
        if M is None:
            raise InvalidArgument("a singular set or a precomputed weight field is required")
        rho = rho_field(g, M, aniso)
    h = g.spacing
    w = np.zeros(g.dims)
    weight = rho ** (mf - gamma)
    for i, mi in enumerate(orders):
        if mi > 0:
            w += np.abs(weight * derivative(g.data, i, mi, h[i])) ** p
    w *= g.cell_volume
    floor = 1e-12 * max(float(np.max(np.abs(g.data))), 1e-300) * tree.sample_scale
    out: dict = {j: [] for j in range(tree.J)}
    for (j, u), lab in part.labels.items():
        sel = lab >= 1
        if not sel.any():
            continue
        geo = tree.band_geometry(j, u)
        mu = _box_sums(w, g, geo) ** (1.0 / p)
        num = np.abs(tree.band(j, u))
        # rho_I > 0 on interior shells; other entries are dropped below
        rI = np.where(sel, part.rho[(j, u)], 1.0)
        scale = tree.cell_measure(j) ** (mf / ns + 0.5 - 1.0 / p) * rI ** (gamma - mf)
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(num <= floor, 0.0, num / (scale * mu))
        out[j].append(r[sel])
    return {j: np.concatenate(v) if v else np.zeros(0) for j, v in out.items()}


def whitney_coeff_bound(
    tree: CoefficientTree, part: ShellPartition, g: Grid, m, gamma: float, p: float,
    rho: np.ndarray | None = None, M: SingularSet | None = None,
) -> WhitneyReport:
    per = whitney_ratios(tree, part, g, m, gamma, p, rho=rho, M=M)
    allr = np.concatenate(list(per.values())) if per else np.zeros(0)
    if allr.size == 0:
        raise InvalidArgument("no interior coefficients (k >= 1) to bound")

    def pct(a):
        return {str(q): float(np.percentile(a, q)) for q in _PCTS} if a.size else {}

    return WhitneyReport(
        pct(allr), {j: pct(a) for j, a in per.items()}, int(allr.size),
        {"m": str(as_fraction(m)), "gamma": gamma, "p": p},
    )


# the embedding inequality


def classify_case(gamma, m, r, delta, aniso: Anisotropy) -> int:
    """Sign of ``gamma - m + r (N_s - delta)/N_s`` in exact arithmetic: 1 (>0), 2 (=0), 3 (<0)."""
    gamma, m, r, delta = (_num(v) for v in (gamma, m, r, delta))
    ns = aniso.norm_sum
    val = gamma - m + r * (ns - delta) / ns
    return 1 if val > 0 else (2 if val == 0 else 3)


@dataclass
class EmbeddingReport:
    lhs: float
    kondratiev: float
    besov: float
    rhs: float
    ratio: float | None
    case: int
    tau: float
    shell_sums: dict
    boundary_sum: float
    shell_fit: float | None
    whitney: dict | None
    params: dict

    def to_dict(self) -> dict:
        return {
            "lhs": self.lhs,
            "rhs": {"kondratiev_seminorm": self.kondratiev, "besov_norm": self.besov, "max": self.rhs},
            "ratio": self.ratio,
            "case": self.case,
            "tau": self.tau,
            "shell_sums": [{"level": j, "k": k, "sum": v} for (j, k), v in sorted(self.shell_sums.items())],
            "boundary_sum": self.boundary_sum,
            "shell_fit_C": self.shell_fit,
            "whitney": self.whitney,
            "params": self.params,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def shell_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["level", "k", "sum"])
            for (j, k), v in sorted(self.shell_sums.items()):
                wr.writerow([j, k, format(v, ".17g")])


@dataclass(frozen=True)
class EmbeddingParams:
    m: object
    gamma: float
    s: float
    r: float
    p: float

    @classmethod
    def from_dict(cls, d: dict) -> "EmbeddingParams":
        return cls(d["m"], d["gamma"], d["s"], d["r"], d["p"])

    def to_dict(self) -> dict:
        m = as_fraction(self.m)
        return {"m": str(m) if m.denominator != 1 else int(m), "gamma": self.gamma, "s": self.s, "r": self.r, "p": self.p}


def embedding_check(
    g: Grid, params, M: SingularSet, aniso: Anisotropy, bank: BiorthFilterBank | None = None,
    J: int | None = None, mode: str = "zero_pad", diagnostics: bool = True, force: bool = False,
) -> EmbeddingReport:
    """Compare the adaptivity norm with ``max(Kondratiev seminorm, Besov norm)``.

    Inadmissible parameters are refused unless ``force`` is set, which is
    meant for divergence studies; the report then records the failed
    condition under ``params["admissible"]``.
    """
    if isinstance(params, dict):
        params = EmbeddingParams.from_dict(params)
    adm = embedding_admissible(params.r, params.m, params.s, params.gamma, M.delta, aniso, params.p)
    if not adm and not force:
        raise InadmissibleParameters(adm.reason)
    bank = bank or make_spline_filters(2, 2)
    J = J or max_depth(g.dims, aniso, bank)
    tree = forward(g, bank, aniso, J, mode)
    rho = rho_field(g, M, aniso)
    p = float(params.p)
    kon = kondratiev_norm(g, params.m, aniso, params.gamma, p, rho=rho, seminorm_only=True).value
    bes = besov_wavelet_norm(tree, float(params.s), p, p).value

    tau = float(adaptivity_tau(params.r, params.p, aniso.norm_sum))
    dm = tree.det_m
    part = shell_partition(tree, M, aniso)
    shell_sums: dict = {}
    boundary = 0.0
    for (j, u), lab in part.labels.items():
        c = (dm ** (j * (0.5 - 1.0 / p)) * np.abs(tree.band(j, u))) ** tau
        for k in np.unique(lab):
            v = float(c[lab == k].sum())
            if k == BOUNDARY:
                boundary += v
            else:
                shell_sums[(j, int(k))] = shell_sums.get((j, int(k)), 0.0) + v
    coarse = float(np.sum(np.abs(tree.coarse()) ** tau) ** (1.0 / tau))
    detail = (boundary + sum(shell_sums.values())) ** (1.0 / tau)
    lhs = coarse + detail
    rhs = max(kon, bes)
    ratio = lhs / rhs if rhs > 0 else None

    fit = None
    whit = None
    if diagnostics:
        try:
            fit = fit_shell_constant(part, M.delta)
        except InvalidArgument:
            fit = None
        if rhs > 0:
            try:
                whit = whitney_coeff_bound(tree, part, g, params.m, params.gamma, p, rho=rho).to_dict()
            except InvalidArgument:
                whit = None
    return EmbeddingReport(
        lhs, kon, bes, rhs, ratio,
        classify_case(params.gamma, params.m, params.r, M.delta, aniso),
        tau, shell_sums, boundary, fit, whit,
        dict(params.to_dict(), J=J, delta=M.delta, binding=adm.binding, r_bound=adm.r_bound, admissible=adm.reason,
             filter=[bank.L, bank.L_dual], mode=mode),
    )


@dataclass
class CorpusSummary:
    ratios: list
    max_ratio: float | None
    median_ratio: float | None
    excluded: list
    nonfinite: list

    def to_dict(self) -> dict:
        return {
            "ratios": self.ratios, "max_ratio": self.max_ratio, "median_ratio": self.median_ratio,
            "excluded": self.excluded, "nonfinite": self.nonfinite,
        }


def corpus_embedding_study(corpus: Sequence[Grid], params, M: SingularSet, aniso: Anisotropy, **kw) -> CorpusSummary:
    """Run the check on every grid; zero functions are excluded from the statistics."""
    if not corpus:
        raise InvalidArgument("corpus is empty")
    ratios, excluded, bad = [], [], []
    for idx, g in enumerate(corpus):
        rep = embedding_check(g, params, M, aniso, diagnostics=False, **kw)
        if rep.ratio is None:
            excluded.append(idx)
            ratios.append(None)
            continue
        if not math.isfinite(rep.ratio):
            bad.append(idx)
        ratios.append(rep.ratio)
    good = [r for r in ratios if r is not None and math.isfinite(r)]
    return CorpusSummary(
        ratios, max(good) if good else None, float(np.median(good)) if good else None, excluded, bad,
    )


def refinement_dims(aniso: Anisotropy, coarse: Sequence[int], J: int) -> tuple[int, ...]:
    """Grid shape whose depth-``J`` transform has the given coarse block."""
    return tuple(int(c) << (J * bi) for c, bi in zip(coarse, aniso.b))


def refinement_study(
    fn, box, params, aniso: Anisotropy, depths: Sequence[int], M_factory,
    coarse: Sequence[int] = (4, 4), bank: BiorthFilterBank | None = None, force: bool = False,
) -> list[EmbeddingReport]:
    """Embedding reports for ``fn`` on grids that add one level at a time.

    The coarse block stays fixed, so tree level ``j`` describes the same
    physical scale on every grid.  ``M_factory(grid)`` supplies the sampled
    singular set for each grid.
    """
    out = []
    for J in depths:
        g = Grid.sample(fn, refinement_dims(aniso, coarse, J), box)
        out.append(embedding_check(g, params, M_factory(g), aniso, bank, J, diagnostics=False, force=force))
    return out
