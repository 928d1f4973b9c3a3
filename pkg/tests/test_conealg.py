import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from finslerslip.conealg import (Functional, bounded_inversion, cone_certify, cone_product, cone_scale, cone_sum,
                                 dual_norm_bracket, eval_functional, extended_norm, functional_apply, span)
from finslerslip.errors import ChartMismatchError, MalformedInputError, NotInConeError, PreconditionError
from finslerslip.fields import AffineField, ArctanRidge, ConstantField, shifted_arctan
from finslerslip.finsler import EuclideanField, Example31Field, FinslerChart, RandersField


@pytest.fixture(scope="module")
def line():
    return FinslerChart([[-20.0, 20.0]], Example31Field(), (401,))


@pytest.fixture(scope="module")
def plane():
    return FinslerChart([[-2, 2], [-2, 2]], RandersField([0.4, 0.1]), (9, 9))


def test_certify_reports_every_failed_clause(line):
    with pytest.raises(NotInConeError) as err:
        cone_certify(AffineField([-1.0], 0.0), line)
    assert "sign" in err.value.clauses
    wide = FinslerChart([[-1e4, 1e4]], Example31Field(), (201,))
    with pytest.raises(NotInConeError) as err:
        cone_certify(AffineField([1.0], 1e4), wide)
    assert "slip" in err.value.clauses


def test_worked_product_on_example31():
    chart = FinslerChart([[-1e8, 1e8]], Example31Field(), (3,))
    grid = np.concatenate([-np.logspace(8, -3, 400), [0.0], np.logspace(-3, 8, 400)])
    f = cone_certify(shifted_arctan(), chart, grid)
    assert f.hemi_norm == pytest.approx(math.pi, rel=1e-7)
    p = cone_product(f, f, with_bound=True)
    assert p.element.hemi_norm == pytest.approx(math.pi ** 2, rel=1e-7)
    assert p.bound == pytest.approx(2 * math.pi ** 2, rel=1e-7)


def test_chart_mismatch(line, plane):
    a = cone_certify(ConstantField(1.0), line)
    b = cone_certify(ConstantField(1.0, 2), plane)
    with pytest.raises(ChartMismatchError):
        cone_sum(a, b)
    with pytest.raises(MalformedInputError):
        cone_scale(a, -1.0)


def test_span_arithmetic(line):
    f = cone_certify(shifted_arctan(), line)
    g = cone_certify(ConstantField(2.0), line)
    s = span(f, g)
    assert (s + s).equals(s.scale(2.0))
    assert (s - s).equals(span(cone_certify(ConstantField(0.0), line)))
    assert (s * s).equals(span(cone_product(f, f), cone_certify(ConstantField(0.0), line)) - (
        span(cone_product(f, g)).scale(2.0)) + span(cone_product(g, g)), atol=1e-9)
    assert extended_norm(span(f)) == pytest.approx(f.hemi_norm)


def test_difference_outside_cone_has_infinite_norm(line):
    f = cone_certify(ConstantField(1.0), line)
    g = cone_certify(ConstantField(2.0), line)
    assert math.isinf(extended_norm(span(f, g)))


def test_bounded_inversion(line):
    a = cone_certify(ArctanRidge(1.0, 0.0, 1.0, 3.0), line)
    inv = bounded_inversion(a)
    X = line.grid_points()
    assert np.allclose(inv.inverse.values(), 1.0 / a.values(X))
    assert inv.neg_slip_norm <= a.slip_norm + 1e-12
    with pytest.raises(PreconditionError):
        bounded_inversion(cone_certify(shifted_arctan(), line))


def test_bracket_on_example31():
    chart = FinslerChart.with_step(Example31Field(), [[-2, 3]], 0.01)
    b = dual_norm_bracket(eval_functional(1.0, chart) - eval_functional(0.0, chart), chart, 1e-3)
    assert b.lower <= math.pi / 4 <= b.upper + 1e-12
    assert b.upper - b.lower <= 5e-3


def test_bracket_euclidean_truncates_at_one():
    chart = FinslerChart([[-10.0, 10.0]], EuclideanField(1), (201,))
    b = dual_norm_bracket(eval_functional(5.0, chart) - eval_functional(0.0, chart), chart, 1e-3)
    assert b.upper == pytest.approx(5.0)
    assert 1 - 3e-3 <= b.lower <= 1.0 + 1e-9


def test_bracket_rejects_other_functionals(line):
    with pytest.raises(MalformedInputError):
        dual_norm_bracket(eval_functional(1.0, line), line)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 3), st.floats(-2, 2), st.floats(0.1, 3), st.floats(-2, 2), st.floats(0, 2), st.floats(0, 2))
def test_product_bound_holds(k1, b1, k2, b2, o1, o2):
    chart = FinslerChart([[-2, 2], [-2, 2]], RandersField([0.4, 0.1]), (9, 9))
    f = ArctanRidge([k1, -k2], b1, 1.0, math.pi / 2 + o1)
    g = ArctanRidge([k2, k1], b2, 1.0, math.pi / 2 + o2)
    p = cone_product(cone_certify(f, chart), cone_certify(g, chart), with_bound=True)
    assert p.holds


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.floats(-19, 19), st.floats(-3, 3)), min_size=1, max_size=5),
       st.floats(-3, 3))
def test_functionals_are_linear(atoms, c):
    chart = FinslerChart([[-20.0, 20.0]], Example31Field(), (41,))
    phi = Functional(list(atoms))
    f = cone_certify(shifted_arctan(), chart)
    g = cone_certify(ConstantField(1.5), chart)
    lhs = functional_apply(phi, span(f) + span(g).scale(2.0))
    rhs = functional_apply(phi, f) + 2.0 * functional_apply(phi, g)
    assert lhs == pytest.approx(rhs, abs=1e-9)
    assert functional_apply(phi.scale(c), f) == pytest.approx(c * functional_apply(phi, f), abs=1e-9)
