"""Anisotropic tensor-product wavelet transform.

One anisotropic level performs ``b[i]`` dyadic analysis steps along every
axis ``i`` of the current approximation block, so the level-to-level
dilation is ``M = diag(2**b)``.  Coefficients are kept in a single array
with the grid's shape (Mallat layout).  Along axis ``i`` a level block of
length ``B`` holds the approximation in ``[0, B / 2**b_i)`` and the detail
of sub-step ``s`` (``s = 1`` is the finest) in ``[B / 2**s, B / 2**(s-1))``.

Levels are numbered from the coarse lattice: ``j = 0`` is the coarsest
detail level and ``j = J - 1`` the finest.  A band is labelled by a type
pattern ``u`` with ``u[i] = 0`` for the approximation along axis ``i`` and
``u[i] = s`` for detail sub-step ``s``; the all-zero pattern is excluded.

Samples are treated as fine-scale scaling coefficients at cell centres and
every coefficient is scaled by the square root of the cell volume, so that
coefficients approximate inner products with L2-normalized dual wavelets.
"""

from __future__ import annotations

import itertools
import struct
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Iterator, NamedTuple

import numpy as np

from .anisotropy import Anisotropy
from .errors import InvalidArgument
from .filters import BiorthFilterBank, apply_analysis, apply_synthesis, make_spline_filters, _validate_mode
from .grid import Grid, read_header, write_header

TREE_MAGIC = b"AWCT"


class AxisGeometry(NamedTuple):
    k: np.ndarray
    cell_lo: np.ndarray
    cell_hi: np.ndarray
    q_lo: np.ndarray
    q_hi: np.ndarray


class IndexCuboid(NamedTuple):
    level: int
    band: tuple[int, ...]
    k: tuple[int, ...]
    I: tuple[tuple[float, float], ...]
    Q: tuple[tuple[float, float], ...]
    measure: float


@dataclass(eq=False)
class CoefficientTree:
    coeffs: np.ndarray
    aniso: Anisotropy
    J: int
    bank: BiorthFilterBank
    mode: str
    box: tuple[tuple[float, float], ...]

    @property
    def D(self) -> int:
        return self.coeffs.ndim

    @property
    def dims(self) -> tuple[int, ...]:
        return self.coeffs.shape

    @property
    def b(self) -> tuple[int, ...]:
        return self.aniso.b

    @property
    def det_m(self) -> int:
        return self.aniso.schedule.det_m

    @property
    def coarse_shape(self) -> tuple[int, ...]:
        return tuple(n >> (self.J * bi) for n, bi in zip(self.dims, self.b))

    @property
    def sample_scale(self) -> float:
        # sqrt of the fine cell volume
        vol = np.prod([(hi - lo) / n for (lo, hi), n in zip(self.box, self.dims)])
        return float(np.sqrt(vol))

    def block_shape(self, j: int) -> tuple[int, ...]:
        """Shape of the approximation block that level ``j`` splits."""
        return tuple(c << ((j + 1) * bi) for c, bi in zip(self.coarse_shape, self.b))

    def bands(self, j: int | None = None) -> list[tuple[int, ...]]:
        pats = [u for u in itertools.product(*(range(bi + 1) for bi in self.b)) if any(u)]
        return pats

    def iter_bands(self) -> Iterator[tuple[int, tuple[int, ...]]]:
        for j in range(self.J):
            for u in self.bands():
                yield j, u

    def _axis_slice(self, j: int, i: int, t: int) -> slice:
        B = self.coarse_shape[i] << ((j + 1) * self.b[i])
        if t == 0:
            return slice(0, B >> self.b[i])
        return slice(B >> t, B >> (t - 1))

    def band_slices(self, j: int, u: tuple[int, ...]) -> tuple[slice, ...]:
        self._check_band(j, u)
        return tuple(self._axis_slice(j, i, t) for i, t in enumerate(u))

    def band(self, j: int, u: tuple[int, ...]) -> np.ndarray:
        return self.coeffs[self.band_slices(j, u)]

    def coarse(self) -> np.ndarray:
        return self.coeffs[tuple(slice(0, c) for c in self.coarse_shape)]

    def level_values(self, j: int) -> np.ndarray:
        return np.concatenate([self.band(j, u).ravel() for u in self.bands()])

    def level_count(self, j: int) -> int:
        return int(np.prod(self.block_shape(j)) - np.prod(self.block_shape(j - 1) if j > 0 else self.coarse_shape))

    def _check_band(self, j: int, u):
        if not 0 <= j < self.J:
            raise InvalidArgument(f"level {j} outside [0, {self.J})")
        if len(u) != self.D or not any(u) or any(not 0 <= t <= bi for t, bi in zip(u, self.b)):
            raise InvalidArgument(f"invalid band pattern {u} for steps {self.b}")

    # geometry

    def coarse_cell(self) -> np.ndarray:
        return np.array([(hi - lo) / c for (lo, hi), c in zip(self.box, self.coarse_shape)])

    def cell_width(self, j: int) -> np.ndarray:
        return self.coarse_cell() / np.array([2.0 ** (j * bi) for bi in self.b])

    def axis_geometry(self, j: int, i: int, t: int) -> AxisGeometry:
        """Per-axis lattice index, cell ``I`` and support hull ``Q`` for band entries.

        ``j = -1`` with ``t = 0`` describes the coarse scaling block.
        """
        bi = self.b[i]
        c = self.coarse_shape[i]
        lo = self.box[i][0]
        h0 = (self.box[i][1] - lo) / c
        jj = max(j, 0)
        hj = h0 / 2.0 ** (jj * bi)
        if t == 0:
            ell = jj * bi
            q = np.arange(c << ell)
            k = q
            sup = [self.bank.phi_support(), self.bank.dual_phi_support()]
        else:
            ell = (j + 1) * bi - t
            q = np.arange(c << ell)
            k = q >> (bi - t)
            sup = [self.bank.psi_support(), self.bank.dual_psi_support()]
        hd = h0 / 2.0**ell
        cell_lo = lo + k * hj
        cell_hi = cell_lo + hj
        s_lo = min(s[0] for s in sup)
        s_hi = max(s[1] for s in sup)
        q_lo = np.minimum(cell_lo, lo + (q + s_lo) * hd)
        q_hi = np.maximum(cell_hi, lo + (q + s_hi) * hd)
        return AxisGeometry(k, cell_lo, cell_hi, q_lo, q_hi)

    def band_geometry(self, j: int, u: tuple[int, ...]) -> list[AxisGeometry]:
        self._check_band(j, u)
        return [self.axis_geometry(j, i, t) for i, t in enumerate(u)]

    def boundary_mask(self, j: int, u: tuple[int, ...]) -> np.ndarray:
        """True where ``Q(I)`` reaches the boundary of the box."""
        return self._touch_mask([self.axis_geometry(j, i, t) for i, t in enumerate(u)])

    def coarse_boundary_mask(self) -> np.ndarray:
        return self._touch_mask([self.axis_geometry(-1, i, 0) for i in range(self.D)])

    def _touch_mask(self, geo: list[AxisGeometry]) -> np.ndarray:
        mask = np.zeros(tuple(len(g.k) for g in geo), dtype=bool)
        for i, g in enumerate(geo):
            lo, hi = self.box[i]
            tol = 1e-12 * (hi - lo)
            touch = (g.q_lo <= lo + tol) | (g.q_hi >= hi - tol)
            shape = [1] * self.D
            shape[i] = -1
            mask = mask | touch.reshape(shape)
        return mask

    def cell_measure(self, j: int) -> float:
        return float(np.prod(self.cell_width(j)))

    def to_grid_data(self) -> np.ndarray:
        return inverse(self).data


def _check_divisibility(dims, aniso: Anisotropy, J: int, bank: BiorthFilterBank):
    if J < 1:
        raise InvalidArgument(f"depth J must be >= 1, got {J}")
    if len(dims) != aniso.D:
        raise InvalidArgument(f"grid has {len(dims)} axes but anisotropy has {aniso.D}")
    need = bank.max_length
    for i, (n, bi) in enumerate(zip(dims, aniso.b)):
        step = 1 << (J * bi)
        if n % step:
            raise InvalidArgument(f"axis {i}: length {n} is not divisible by 2**(J*b_i) = {step}")
        if 2 * (n // step) < need:
            raise InvalidArgument(
                f"axis {i}: coarsest block length {2 * (n // step)} is shorter than the filters ({need} taps)"
            )


def _analysis_sweep(x: np.ndarray, block: tuple[int, ...], steps, bank, mode) -> None:
    for i, bi in enumerate(steps):
        size = block[i]
        for _ in range(bi):
            sl = tuple(slice(0, size if k == i else block[k]) for k in range(len(block)))
            x[sl] = apply_analysis(x[sl], bank, mode, axis=i)
            size //= 2


def _synthesis_sweep(x: np.ndarray, block: tuple[int, ...], steps, bank, mode) -> None:
    for i in reversed(range(len(steps))):
        bi = steps[i]
        for s in reversed(range(bi)):
            size = block[i] >> s
            sl = tuple(slice(0, size if k == i else block[k]) for k in range(len(block)))
            x[sl] = apply_synthesis(x[sl], bank, mode, axis=i)


def forward(
    g: Grid, bank: BiorthFilterBank | None = None, aniso: Anisotropy | None = None, J: int = 1,
    mode: str = "zero_pad",
) -> CoefficientTree:
    bank = bank or make_spline_filters(2, 2)
    if aniso is None:
        raise InvalidArgument("an anisotropy is required")
    _validate_mode(mode)
    _check_divisibility(g.dims, aniso, J, bank)
    tree = CoefficientTree(np.array(g.data, dtype=float), aniso, J, bank, mode, g.box)
    x = tree.coeffs
    for j in reversed(range(J)):
        _analysis_sweep(x, tree.block_shape(j), aniso.b, bank, mode)
    x *= tree.sample_scale
    return tree


def inverse(tree: CoefficientTree, bank: BiorthFilterBank | None = None) -> Grid:
    if bank is not None and bank.key != tree.bank.key:
        raise InvalidArgument("filter bank differs from the one used by the forward transform")
    x = tree.coeffs / tree.sample_scale
    for j in range(tree.J):
        _synthesis_sweep(x, tree.block_shape(j), tree.b, tree.bank, tree.mode)
    return Grid(x, tree.box)


def zeros_like(tree: CoefficientTree) -> CoefficientTree:
    return CoefficientTree(np.zeros_like(tree.coeffs), tree.aniso, tree.J, tree.bank, tree.mode, tree.box)


def cuboid_of(tree: CoefficientTree, j: int, band: tuple[int, ...], k: tuple[int, ...]) -> IndexCuboid:
    """Cuboid of the band entry at position ``k`` (array index inside the band)."""
    geo = tree.band_geometry(j, tuple(band))
    if len(k) != tree.D or any(not 0 <= ki < len(g.k) for ki, g in zip(k, geo)):
        raise InvalidArgument(f"index {k} out of range for band {band} at level {j}")
    lat = tuple(int(g.k[ki]) for ki, g in zip(k, geo))
    I = tuple((float(g.cell_lo[ki]), float(g.cell_hi[ki])) for ki, g in zip(k, geo))
    Q = tuple((float(g.q_lo[ki]), float(g.q_hi[ki])) for ki, g in zip(k, geo))
    return IndexCuboid(j, tuple(band), lat, I, Q, tree.cell_measure(j))


def level_measure_exact(tree: CoefficientTree, j: int) -> Fraction:
    """``|I|`` at level ``j`` on the unit-coarse-cell scale, ``m**(-j)`` exactly."""
    return Fraction(1, tree.det_m**j)


def unit_coefficient_tree(template: CoefficientTree, j: int, band, k) -> CoefficientTree:
    t = zeros_like(template)
    t.band(j, tuple(band))[tuple(k)] = 1.0
    return t


def dilate_index_space(g: Grid, bank: BiorthFilterBank, aniso: Anisotropy, mode: str = "zero_pad") -> Grid:
    """Exact index-space dilation by ``M``.

    The samples of ``g`` become the approximation of one extra synthesis
    level with zero details, scaled by ``|det M|**0.5``.  The result lives on
    the box stretched by ``M`` about its lower corner and keeps the sample
    spacing; its coefficients at level ``j`` equal those of ``g`` at level
    ``j`` times ``|det M|**0.5`` on cuboids ``M`` times larger, that is one
    level coarser, and its finest level is zero.
    """
    dims = tuple(n << bi for n, bi in zip(g.dims, aniso.b))
    x = np.zeros(dims)
    x[tuple(slice(0, n) for n in g.dims)] = g.data
    _synthesis_sweep(x, dims, aniso.b, bank, mode)
    x *= np.sqrt(aniso.schedule.det_m)
    box = tuple((lo, lo + (hi - lo) * (1 << bi)) for (lo, hi), bi in zip(g.box, aniso.b))
    return Grid(x, box)


def level_energy(tree: CoefficientTree, p: float) -> np.ndarray:
    """``S_j = (sum_{level j} |c|**p)**(1/p)`` for every level."""
    out = np.empty(tree.J)
    for j in range(tree.J):
        v = np.abs(tree.level_values(j))
        out[j] = np.sum(v**p) ** (1.0 / p) if v.size else 0.0
    return out


# binary tree files: grid header, then J, b, norm_sum, filter, mode, band directory


_MODES = {"zero_pad": 0, "periodic": 1, "symmetric": 2}


def save_tree(tree: CoefficientTree, path):
    with open(path, "wb") as fh:
        write_header(fh, TREE_MAGIC, tree.D, tree.dims, tree.box)
        ns = tree.aniso.norm_sum
        fh.write(struct.pack("<I", tree.J))
        fh.write(np.asarray(tree.b, dtype="<u4").tobytes())
        fh.write(struct.pack("<qq", ns.numerator, ns.denominator))
        fh.write(struct.pack("<III", tree.bank.L, tree.bank.L_dual, _MODES[tree.mode]))
        bands = tree.bands()
        fh.write(struct.pack("<I", len(bands)))
        # directory: per level and band, element offset and count in the data block
        offset = int(np.prod(tree.coarse_shape))
        for j in range(tree.J):
            for u in bands:
                n = int(tree.band(j, u).size)
                fh.write(np.asarray(u, dtype="<u4").tobytes())
                fh.write(struct.pack("<QQ", offset, n))
                offset += n
        fh.write(np.ascontiguousarray(tree.coarse(), dtype="<f8").tobytes())
        for j in range(tree.J):
            for u in bands:
                fh.write(np.ascontiguousarray(tree.band(j, u), dtype="<f8").tobytes())


def load_tree(path) -> CoefficientTree:
    from .anisotropy import make_anisotropy

    with open(path, "rb") as fh:
        dims, box = read_header(fh, TREE_MAGIC)
        D = len(dims)
        (J,) = struct.unpack("<I", fh.read(4))
        b = tuple(int(v) for v in np.frombuffer(fh.read(4 * D), dtype="<u4"))
        num, den = struct.unpack("<qq", fh.read(16))
        L, Ld, mode_id = struct.unpack("<III", fh.read(12))
        (nb,) = struct.unpack("<I", fh.read(4))
        directory = []
        for _ in range(J * nb):
            u = tuple(int(v) for v in np.frombuffer(fh.read(4 * D), dtype="<u4"))
            off, n = struct.unpack("<QQ", fh.read(16))
            directory.append((u, off, n))
        mode = {v: k for k, v in _MODES.items()}[mode_id]
        aniso = make_anisotropy(b, Fraction(num, den))
        tree = CoefficientTree(np.zeros(dims), aniso, J, make_spline_filters(L, Ld), mode, box)
        nc = int(np.prod(tree.coarse_shape))
        tree.coarse()[...] = np.frombuffer(fh.read(8 * nc), dtype="<f8").reshape(tree.coarse_shape)
        for idx, (u, off, n) in enumerate(directory):
            j = idx // nb
            view = tree.band(j, u)
            raw = fh.read(8 * n)
            if len(raw) != 8 * n or view.size != n:
                raise InvalidArgument("coefficient file is truncated or inconsistent")
            view[...] = np.frombuffer(raw, dtype="<f8").reshape(view.shape)
    return tree


class HomogeneityResult(NamedTuple):
    lhs: float
    rhs: float
    ratio: float


def _shifted_seminorm(S: np.ndarray, aniso: Anisotropy, alpha: float, p: float, levels) -> float:
    m = aniso.schedule.det_m
    beta = alpha / float(aniso.norm_sum) + 0.5 - 1.0 / p
    return float(sum((m ** (j * beta) * S[j]) ** p for j in levels) ** (1.0 / p))


def homogeneity_probe(
    fn, bank: BiorthFilterBank, aniso: Anisotropy, alpha: float, p: float, n: int = 256,
    box=None, J: int | None = None, mode: str = "zero_pad",
) -> HomogeneityResult:
    """Compare ``|det M|**(1/p) |f o M|`` with ``lam**alpha |f|``.

    ``fn(*coords)`` is sampled at ``n`` points per axis on ``box`` (default
    ``[-1, 1]**D``), together with ``f o M``.  Dilation moves content one
    level coarser, so level ``j + 1`` of ``f o M`` is paired with level ``j``
    of ``f``; the seminorms are summed over these matched windows and the
    only remaining discrepancy is the sampling error.
    """
    D = aniso.D
    box = box or ((-1.0, 1.0),) * D
    if J is None:
        J = 1
        while True:
            try:
                _check_divisibility((n,) * D, aniso, J + 1, bank)
            except InvalidArgument:
                break
            J += 1
    if J < 2:
        raise InvalidArgument("probe needs at least two levels")
    factors = [2 ** bi for bi in aniso.b]
    g1 = Grid.sample(fn, (n,) * D, box)
    g2 = Grid.sample(lambda *x: fn(*(f * xi for f, xi in zip(factors, x))), (n,) * D, box)
    S1 = level_energy(forward(g1, bank, aniso, J, mode), p)
    S2 = level_energy(forward(g2, bank, aniso, J, mode), p)
    m = aniso.schedule.det_m
    lhs = m ** (1.0 / p) * _shifted_seminorm(S2, aniso, alpha, p, range(1, J))
    rhs = aniso.schedule.lam**alpha * _shifted_seminorm(S1, aniso, alpha, p, range(0, J - 1))
    ratio = lhs / rhs if rhs > 0 else float("nan")
    return HomogeneityResult(lhs, rhs, ratio)
