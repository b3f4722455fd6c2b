import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from anisowave.errors import InvalidArgument
from anisowave.filters import (
    BOUNDARY_MODES, analysis_step, apply_analysis, apply_synthesis, biorthogonality_defect, make_spline_filters,
    riesz_bounds, synthesis_step, vanishing_moment_defect,
)

BANKS = [(1, 1), (1, 3), (2, 2), (2, 4), (3, 3), (4, 4)]


@pytest.mark.parametrize("L,Ld", BANKS)
def test_biorthogonal(L, Ld):
    assert biorthogonality_defect(make_spline_filters(L, Ld)) < 1e-13


@pytest.mark.parametrize("L,Ld", BANKS)
def test_dual_moments(L, Ld):
    bank = make_spline_filters(L, Ld)
    assert vanishing_moment_defect(bank, L - 1) < 1e-13
    assert vanishing_moment_defect(bank, L) > 1e-6


def test_haar_taps():
    bank = make_spline_filters(1, 1)
    assert np.allclose(bank.h.taps, [2**-0.5, 2**-0.5])
    assert bank.name == "cdf1.1"


def test_53_taps():
    bank = make_spline_filters(2, 2)
    assert np.allclose(bank.h.taps / np.sqrt(2), [0.25, 0.5, 0.25])
    assert np.allclose(bank.ht.taps / np.sqrt(2), [-1 / 8, 1 / 4, 3 / 4, 1 / 4, -1 / 8])


@pytest.mark.parametrize("L,Ld", [(0, 2), (2, 1), (1.5, 2)])
def test_bad_orders(L, Ld):
    with pytest.raises(InvalidArgument):
        make_spline_filters(L, Ld)


@pytest.mark.parametrize("mode", BOUNDARY_MODES)
@given(x=arrays(np.float64, 32, elements=st.floats(-1e3, 1e3)))
def test_step_roundtrip(mode, x):
    bank = make_spline_filters(2, 2)
    a, d = analysis_step(x, bank, mode)
    y = synthesis_step(a, d, bank, mode)
    assert np.allclose(y, x, atol=1e-9 * (1 + np.abs(x).max()))


@pytest.mark.parametrize("mode", BOUNDARY_MODES)
def test_axis_roundtrip(mode, rng):
    bank = make_spline_filters(4, 4)
    x = rng.standard_normal((16, 24, 3))
    y = apply_analysis(x, bank, mode, axis=1)
    assert np.allclose(apply_synthesis(y, bank, mode, axis=1), x, atol=1e-12)


def test_constant_has_no_interior_detail():
    bank = make_spline_filters(2, 2)
    _, d = analysis_step(np.ones(32), bank, "zero_pad")
    assert np.allclose(d[2:-2], 0, atol=1e-14)
    _, d = analysis_step(np.ones(32), bank, "symmetric")
    assert np.allclose(d, 0, atol=1e-14)


def test_length_checks():
    bank = make_spline_filters(2, 2)
    with pytest.raises(InvalidArgument):
        analysis_step(np.ones(7), bank)
    with pytest.raises(InvalidArgument):
        analysis_step(np.ones(2), bank)
    with pytest.raises(InvalidArgument):
        analysis_step(np.ones(8), bank, "reflect")


def test_riesz_bounds_positive():
    lo, hi = riesz_bounds(make_spline_filters(2, 2), 32)
    assert 0 < lo <= hi < 10


def test_json_has_taps():
    import json

    obj = json.loads(make_spline_filters(2, 2).to_json())
    assert obj["L"] == 2 and len(obj["ht"]["taps"]) == 5
