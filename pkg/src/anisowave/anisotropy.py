"""Anisotropy vectors, dilation schedules and smoothness-scale bookkeeping.

An anisotropy is stored through its integer dyadic step vector ``b``: one
anisotropic refinement level performs ``b[i]`` dyadic steps along axis ``i``,
so the dilation matrix is ``diag(2**b)``.  The anisotropy exponents follow as
``a[i] = sum(b) / (norm_sum * b[i])`` and always satisfy
``sum(1 / a) == norm_sum`` exactly.  All exponent arithmetic is rational.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Sequence

import numpy as np

from .errors import InvalidArgument

__all__ = [
    "Anisotropy",
    "DilationSchedule",
    "SmoothnessScale",
    "Admissibility",
    "HeatAlphaBounds",
    "as_fraction",
    "make_anisotropy",
    "heat_anisotropy",
    "adaptivity_tau",
    "aimar_tau",
    "embedding_admissible",
    "heat_alpha_bounds",
    "aniso_distance",
    "mean_smoothness_convert",
    "mean_smoothness_invert",
    "heat_alpha_from_r",
    "heat_r_from_alpha",
]


def as_fraction(value, max_denominator: int = 10**6) -> Fraction:
    """Coerce ints, Fractions, ``"p/q"`` strings and floats to a Fraction.

    Floats are snapped to the nearest fraction with bounded denominator, so
    ``as_fraction(2/3) == Fraction(2, 3)``.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, (float, np.floating)):
        if not math.isfinite(value):
            raise InvalidArgument(f"non-finite value {value!r}")
        return Fraction(float(value)).limit_denominator(max_denominator)
    raise InvalidArgument(f"cannot interpret {value!r} as a rational number")


@dataclass(frozen=True)
class Anisotropy:
    b: tuple[int, ...]
    norm_sum: Fraction

    def __post_init__(self):
        if len(self.b) < 1:
            raise InvalidArgument("anisotropy needs at least one axis")
        if any(int(bi) != bi or bi < 1 for bi in self.b):
            raise InvalidArgument(f"dyadic steps must be integers >= 1, got {self.b}")
        if self.norm_sum <= 0:
            raise InvalidArgument(f"norm_sum must be positive, got {self.norm_sum}")

    @property
    def D(self) -> int:
        return len(self.b)

    @property
    def total_steps(self) -> int:
        return sum(self.b)

    @property
    def a(self) -> tuple[Fraction, ...]:
        s = Fraction(self.total_steps)
        return tuple(s / (self.norm_sum * bi) for bi in self.b)

    @property
    def a_float(self) -> np.ndarray:
        return np.array([float(x) for x in self.a])

    @property
    def schedule(self) -> "DilationSchedule":
        return DilationSchedule(self)

    def to_json(self) -> dict:
        return {"b": list(self.b), "norm_sum": str(self.norm_sum)}

    @classmethod
    def from_json(cls, obj) -> "Anisotropy":
        return make_anisotropy(obj["b"], obj["norm_sum"])


@dataclass(frozen=True)
class DilationSchedule:
    """Dilation ``M = diag(2**b)`` compatible with an anisotropy.

    ``lam`` is the level-to-level scale gain; ``log2_lambda`` keeps it exact.
    """

    aniso: Anisotropy

    @property
    def per_axis_factor(self) -> tuple[int, ...]:
        return tuple(2**bi for bi in self.aniso.b)

    @property
    def log2_lambda(self) -> Fraction:
        return Fraction(self.aniso.total_steps) / self.aniso.norm_sum

    @property
    def lam(self) -> float:
        return 2.0 ** float(self.log2_lambda)

    @property
    def det_m(self) -> int:
        return 2**self.aniso.total_steps

    def axis_exponent(self, i: int) -> Fraction:
        """Exponent ``e`` with ``lam**(1/a_i) == 2**e``; equals ``b[i]``."""
        return self.log2_lambda / self.aniso.a[i]


@dataclass(frozen=True)
class SmoothnessScale:
    alpha: float
    p: float
    q: float
    aniso: Anisotropy

    @property
    def per_axis(self) -> tuple[float, ...]:
        return tuple(self.alpha * float(ai) for ai in self.aniso.a)


def make_anisotropy(b: Sequence[int], norm_sum) -> Anisotropy:
    steps = tuple(int(x) for x in b)
    if any(int(x) != x for x in b):
        raise InvalidArgument(f"dyadic steps must be integers, got {list(b)}")
    return Anisotropy(steps, as_fraction(norm_sum))


def heat_anisotropy(d_space: int) -> Anisotropy:
    """Parabolic anisotropy on ``R^(d+1)``: ``a = (d+2)/d * (1, ..., 1, 1/2)``."""
    if int(d_space) != d_space or d_space < 1:
        raise InvalidArgument(f"spatial dimension must be >= 1, got {d_space}")
    return make_anisotropy((1,) * int(d_space) + (2,), int(d_space))


def _num(x):
    # keep ints/Fractions exact, everything else becomes float
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return Fraction(int(x))
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        return Fraction(x)
    return float(x)


def adaptivity_tau(r, p, norm_sum):
    """Integrability of the adaptivity scale: ``1/tau = r/norm_sum + 1/p``."""
    r, p, ns = _num(r), _num(p), _num(norm_sum)
    if r < 0:
        raise InvalidArgument(f"r must be >= 0, got {r}")
    if p <= 0:
        raise InvalidArgument(f"p must be positive, got {p}")
    inv = r / ns + 1 / p
    return 1 / inv


def aimar_tau(alpha, p, d):
    """The competing convention ``1/tau = 1/p + alpha/d`` on the parabolic scale."""
    alpha, p, d = _num(alpha), _num(p), _num(d)
    return 1 / (1 / p + alpha / d)


class Admissibility(NamedTuple):
    ok: bool
    reason: str
    binding: str
    r_bound: float

    def __bool__(self):
        return self.ok


def embedding_admissible(r, m, s, gamma, delta, aniso: Anisotropy, p) -> Admissibility:
    """Check the hypotheses of the Kondratiev-to-Besov embedding.

    Conditions: ``0 <= r < min(m, s*d/(D-1))``, ``r < s*d/delta`` when
    ``delta > 0`` and ``gamma > delta*r/d`` with ``d = aniso.norm_sum``.
    The returned ``binding`` names the smallest upper bound on ``r``.
    """
    r, m, s, gamma, delta, p = map(_num, (r, m, s, gamma, delta, p))
    D = aniso.D
    ns = aniso.norm_sum
    if m <= 0:
        raise InvalidArgument(f"m must be positive, got {m}")
    if not 0 <= delta <= D - 1:
        raise InvalidArgument(f"singular-set dimension must lie in [0, {D - 1}], got {delta}")

    bounds = {"m": m}
    bounds["s·d/(d−1)"] = s * ns / (D - 1) if D > 1 else math.inf
    bounds["s·d/δ"] = s * ns / delta if delta > 0 else math.inf
    binding = min(bounds, key=lambda k: bounds[k])
    r_bound = float(bounds[binding])

    def verdict(ok, reason):
        return Admissibility(ok, reason, binding, r_bound)

    if not 1 < p < math.inf:
        return verdict(False, "p ∉ (1, ∞)")
    if r < 0:
        return verdict(False, "r < 0")
    if r >= m:
        return verdict(False, "r ≥ m")
    if r >= bounds["s·d/(d−1)"]:
        return verdict(False, "r ≥ s·d/(d−1)")
    if r >= bounds["s·d/δ"]:
        return verdict(False, "r ≥ s·d/δ")
    if gamma <= delta * r / ns:
        return verdict(False, "γ ≤ δr/d")
    return verdict(True, "admissible")


class HeatAlphaBounds(NamedTuple):
    improved: object
    aimar: object


def heat_alpha_bounds(s, p, d_space: int, n: int) -> HeatAlphaBounds:
    """Upper bounds on the parabolic-scale smoothness of temperatures.

    ``improved = min(2n, s(d+1)/d)`` comes from the Kondratiev route,
    ``aimar = min(d(1 - 1/p), s d/(d-1))`` is the interpolation baseline
    (``inf`` second term when ``d == 1``).  Rational inputs give exact output.
    """
    s, p = _num(s), _num(p)
    d = Fraction(int(d_space))
    if s <= 0 or p <= 1 or n < 1 or d < 1:
        raise InvalidArgument("need s > 0, p > 1, n >= 1, d >= 1")
    improved = min(Fraction(2 * n), s * (d + 1) / d)
    second = s * d / (d - 1) if d > 1 else math.inf
    aimar = min(d * (1 - 1 / p), second)
    return HeatAlphaBounds(improved, aimar)


def aniso_distance(x, y, aniso: Anisotropy) -> float:
    """Anisotropic pseudo-distance ``sum_i |x_i - y_i|**a_i``.

    Not a metric: the triangle inequality fails whenever some ``a_i > 1``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape[-1] != aniso.D or y.shape[-1] != aniso.D:
        raise InvalidArgument(f"points must have {aniso.D} coordinates")
    return np.sum(np.abs(x - y) ** aniso.a_float, axis=-1)


def mean_smoothness_convert(s, d_space: int):
    """Parabolic smoothness ``s`` to anisotropic mean smoothness ``s*d/(d+2)``."""
    s = _num(s)
    if s <= 0:
        raise InvalidArgument(f"s must be positive, got {s}")
    return s * d_space / Fraction(d_space + 2)


def mean_smoothness_invert(s_tilde, d_space: int):
    return _num(s_tilde) * Fraction(d_space + 2) / d_space


def heat_alpha_from_r(r, d_space: int):
    """Adaptivity index ``r`` on the heat anisotropy to parabolic ``alpha``."""
    return _num(r) * Fraction(d_space + 2) / d_space


def heat_r_from_alpha(alpha, d_space: int):
    return _num(alpha) * d_space / Fraction(d_space + 2)
