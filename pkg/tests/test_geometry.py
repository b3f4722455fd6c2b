import numpy as np
import pytest
from hypothesis import given, strategies as st

from anisowave import _backend, _kernels_py
from anisowave.anisotropy import heat_anisotropy, make_anisotropy
from anisowave.errors import InvalidArgument
from anisowave.geometry import (
    Cylinder, SingularSet, parabolic_boundary, parabolic_delta, rho_a, weight_equivalence_probe,
)


def test_cylinder_basics():
    c = Cylinder.unit(2, T=2.0)
    assert c.D == 3 and c.box == ((0, 1), (0, 1), (0, 2))
    assert c.contains(np.array([[0.5, 0.5, 1.0]]))[0]
    assert not c.contains(np.array([[0.5, 0.5, 0.0]]), closed=False)[0]


def test_integer_bounds_become_floats():
    c = Cylinder((0,), (1,), 1)
    assert isinstance(c.lo[0], float) and isinstance(c.T, float)


def test_lshape():
    c = Cylinder.unit(2, shape="lshape")
    pts = np.array([[0.75, 0.75], [0.25, 0.75], [0.75, 0.25], [0.5, 0.5]])
    assert c.contains_spatial(pts).tolist() == [False, True, True, True]
    with pytest.raises(InvalidArgument):
        Cylinder.unit(1, shape="lshape")


@pytest.mark.parametrize("lo,hi,T,shape", [((0,), (1,), 0, "box"), ((1,), (0,), 1, "box"), ((0,), (1,), 1, "disk")])
def test_cylinder_validation(lo, hi, T, shape):
    with pytest.raises(InvalidArgument):
        Cylinder(lo, hi, T, shape)


def test_parabolic_boundary_tags():
    c = Cylinder.unit(1)
    M = parabolic_boundary(c, [0.25, 0.25])
    tags = set(M.tags)
    assert tags == {"bottom", "edge", "lateral"}
    top = M.points[:, 1] > 0
    assert np.all(np.isin(M.points[top, 0], [0.0, 1.0]))
    assert M.delta == 1


def test_lshape_boundary_contains_reentrant_faces():
    c = Cylinder.unit(2, shape="lshape")
    M = parabolic_boundary(c, [0.125, 0.125, 0.25])
    lat = M.points[M.tags == "lateral"]
    on_cut = np.isclose(lat[:, 0], 0.5) & (lat[:, 1] >= 0.5)
    assert on_cut.any()
    assert not np.any((lat[:, 0] > 0.5 + 1e-9) & (lat[:, 1] > 0.5 + 1e-9))


def test_rho_and_delta_analytic():
    c = Cylinder.unit(1)
    M = parabolic_boundary(c, [1 / 256, 1 / 256**2])
    A = heat_anisotropy(1)
    q = np.array([[0.5, 0.5], [0.1, 0.9], [0.5, 0.01]])
    # rho = min(1, min(x^3, (1-x)^3, t^(3/2)))
    expect = np.minimum(1, np.minimum(np.minimum(q[:, 0], 1 - q[:, 0]) ** 3, q[:, 1] ** 1.5))
    assert np.allclose(rho_a(q, M, A), expect, atol=1e-6)
    dl = parabolic_delta(q, M=M)
    expect = np.minimum(np.minimum(q[:, 0], 1 - q[:, 0]), np.sqrt(q[:, 1]))
    assert np.allclose(dl, expect, atol=1 / 256)


def test_singular_set_validation():
    with pytest.raises(InvalidArgument):
        SingularSet(np.zeros((0, 2)), 0)
    with pytest.raises(InvalidArgument):
        SingularSet(np.zeros((3, 2)), 2)
    M = SingularSet(np.zeros((1, 2)), 0, spacing=(0.1, 0.1))
    with pytest.raises(InvalidArgument):
        M.check_resolution([0.1, 0.1])
    M.check_resolution([0.25, 0.25])


@given(st.integers(0, 2**31 - 1))
def test_kernels_match_exhaustive_scan(seed):
    rng = np.random.default_rng(seed)
    pts = rng.random((300, 3))
    q = rng.random((50, 3))
    a = np.array([1.0, 2.0, 0.5])
    M = SingularSet(pts, 2)
    brute = np.min(np.sum(np.abs(q[:, None, :] - pts[None]) ** a, axis=-1), axis=1)
    iso = make_anisotropy((1, 1, 1), 3)
    assert np.allclose(M.min_aniso(q, iso), np.min(np.sum(np.abs(q[:, None] - pts[None]), axis=-1), axis=1))
    tree = _backend.BoxTree(pts)
    assert np.allclose(_kernels_py.min_aniso_dist(q, tree.points, a, tree), brute)
    par = np.min(np.linalg.norm(q[:, None, :2] - pts[None, :, :2], axis=-1) + np.sqrt(np.abs(q[:, None, 2] - pts[None, :, 2])), axis=1)
    assert np.allclose(M.min_parabolic(q), par)


def test_thread_count_does_not_change_results(monkeypatch, rng):
    pts = rng.random((2000, 2))
    q = rng.random((500, 2))
    cloud = _backend.ChunkedCloud(pts)
    one = cloud.min_aniso(q, [3.0, 1.5])
    monkeypatch.setenv("ANISOWAVE_NUM_THREADS", "3")
    assert np.array_equal(cloud.min_aniso(q, [3.0, 1.5]), one)


def test_backend_name():
    assert _backend.backend_name() in ("compiled", "python")


def test_weight_probe_band_small():
    st_ = weight_equivalence_probe(Cylinder.unit(1), heat_anisotropy(1), 500)
    assert 0.5 < st_.min <= st_.median <= st_.max <= 1.0 + 1e-9
    with pytest.raises(InvalidArgument):
        weight_equivalence_probe(Cylinder.unit(1), heat_anisotropy(2), 10)
