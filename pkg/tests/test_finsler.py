import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from finslerslip.errors import InvalidStructureError, MalformedInputError, OutOfDomainError
from finslerslip.finsler import (EuclideanField, Example31Field, FinslerChart, RandersField, RiemannianField,
                                 chart_from_json, chart_index_of_symmetry, distance_matrix_1d, finsler_distance,
                                 finsler_distance_refine, oracle_distances, path_length, randers_1d_distance,
                                 stencil_offsets, validate_minkowski)


def randers_dual(xi, b):
    """Dual of ``|v| + b . v``: ``sup xi . v / F(v)``."""
    xi, b = np.asarray(xi, float), np.asarray(b, float)
    lam = 1.0 - b @ b
    return (math.sqrt(lam * (xi @ xi) + (xi @ b) ** 2) - xi @ b) / lam


def test_example31_costs():
    F = Example31Field()
    assert F(0.0, 1.0) == pytest.approx(1.0)
    assert F(2.0, 1.0) == pytest.approx(1 / 5)
    assert F(2.0, -1.0) == pytest.approx(2 - 1 / 5)


@pytest.mark.parametrize("x,y,expected", [(0, 1, math.pi / 4), (1, 0, 2 - math.pi / 4)])
def test_example31_closed_form(x, y, expected):
    assert randers_1d_distance(x, y, family="example31") == pytest.approx(expected, abs=1e-15)
    phi_p = lambda t: 1 - 1 / (1 + t * t)  # noqa: E731
    assert randers_1d_distance(x, y, phi_prime_fn=phi_p) == pytest.approx(expected, abs=1e-12)


def test_randers_1d_rejects_nonpositive_drift():
    with pytest.raises(InvalidStructureError):
        randers_1d_distance(0.0, 3.0, phi_prime_fn=lambda t: 0.5 * t)


def test_graph_and_refine_on_example31(line31):
    for x, y in ((0.0, 1.0), (1.0, 0.0), (-1.234, 2.5)):
        ref = abs(x - y) + (x - math.atan(x)) - (y - math.atan(y))
        g = finsler_distance(line31, x, y, "graph")
        r = finsler_distance(line31, x, y, "refine")
        assert r.value <= g.value + 1e-12
        assert r.value == pytest.approx(ref, abs=1e-6)


def test_randers_off_axis_refine(randers2d):
    x, y = [-0.83, -0.41], [0.77, 0.59]
    exact = randers2d.field(x, np.subtract(y, x))
    r = finsler_distance(randers2d, x, y, "refine")
    assert r.value == pytest.approx(exact, rel=1e-6)
    assert finsler_distance(randers2d, x, y, "graph").value >= exact - 1e-12


def test_constant_randers_index_is_exact():
    chart = FinslerChart([[-1, 1], [-1, 1]], RandersField([0.3, 0.0]), (5, 5))
    rep = chart_index_of_symmetry(chart, [([0, 0], [0.5, 0]), ([0, 0], [0, 0.5])])
    assert rep.certified_lower == pytest.approx(0.7 / 1.3)
    assert rep.index == pytest.approx(0.7 / 1.3)


def test_minkowski_validation_flags_large_drift():
    xs = np.zeros((1, 2))
    vs = np.random.default_rng(0).normal(size=(50, 2))
    assert validate_minkowski(RandersField([0.3, 0.2]), xs, vs).ok
    assert not validate_minkowski(RandersField([0.9, 0.8]), xs, vs).ok


def test_riemannian_rejects_indefinite_matrix():
    with pytest.raises((InvalidStructureError, MalformedInputError)):
        RiemannianField(np.diag([1.0, -1.0]))


def test_chart_domain_and_json(line31):
    with pytest.raises(OutOfDomainError):
        finsler_distance(line31, 0.0, 5.0)
    again = chart_from_json(line31.to_json())
    assert again.grid == line31.grid and np.allclose(again.box, line31.box)
    with pytest.raises(MalformedInputError):
        FinslerChart([[1.0, 0.0]], EuclideanField(1), (3,))


def test_stencil_is_primitive():
    off = stencil_offsets(2, 2)
    assert len(off) == 16
    assert all(math.gcd(*map(abs, o)) == 1 for o in off.astype(int))


def test_distance_matrix_matches_oracle(line31):
    xs = np.array([-1.5, 0.0, 0.7, 2.9])
    D = distance_matrix_1d(line31, xs)
    for i, a in enumerate(xs):
        for j, b in enumerate(xs):
            assert D[i, j] == pytest.approx(oracle_distances(line31, [a], [b])[0], abs=1e-12)


def test_refine_never_increases_length(randers2d, rng):
    path = np.vstack([[-0.9, -0.9], rng.uniform(-0.9, 0.9, size=(6, 2)), [0.9, 0.8]])
    before = path_length(randers2d, path)
    after = finsler_distance_refine(randers2d, path, max_sweeps=5)
    assert after.value <= before + 1e-12


@settings(max_examples=30, deadline=None)
@given(st.floats(-0.6, 0.6), st.floats(-0.6, 0.6), st.floats(-4, 4), st.floats(-4, 4))
def test_randers_dual_norm_is_the_support_function(b1, b2, x1, x2):
    from finslerslip.semilip import dual_asym_norm
    b = np.array([b1, b2])
    if b @ b >= 0.8:
        return
    F = RandersField(b)
    got = dual_asym_norm(F, np.zeros((1, 2)), np.array([[x1, x2]]))[0]
    assert got == pytest.approx(randers_dual([x1, x2], b), rel=1e-9, abs=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.floats(-1.9, 2.9), st.floats(-1.9, 2.9))
def test_nested_grids_do_not_lengthen_graph_distance(x, y):
    coarse = FinslerChart.with_step(Example31Field(), [[-2, 3]], 0.1)
    fine = FinslerChart.with_step(Example31Field(), [[-2, 3]], 0.05)
    exact = oracle_distances(coarse, [x], [y])[0]
    gc = finsler_distance(coarse, x, y, "graph").value
    gf = finsler_distance(fine, x, y, "graph").value
    assert exact - 1e-9 <= gf <= gc + 1e-9


@settings(max_examples=30, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3))
def test_reversible_field_is_symmetric(x, y):
    chart = FinslerChart([[-3, 3]], RiemannianField(np.array([[2.0]])), (7,))
    d = oracle_distances(chart, [x, y], [y, x])
    assert d[0] == pytest.approx(d[1], abs=1e-12)
