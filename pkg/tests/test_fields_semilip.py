import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from finslerslip.errors import ApproximationFailedError, MalformedInputError
from finslerslip.fields import (AffineField, ArctanRidge, ConstantField, MollifiedField, PhiField, TabulatedField,
                                derivative_self_check, fd_grad, field_from_spec, soft_truncation)
from finslerslip.finsler import EuclideanField, Example31Field, FinslerChart
from finslerslip.semilip import (chain_slip_1d, derivative_asym_norm, example34_ratio_experiment,
                                 grid_quasi_metric_1d, smooth_approximate_1d, sup_derivative_norm,
                                 verify_slip_equals_derivative_sup)
from finslerslip.quasimetric import slip_constant_bruteforce


def test_analytic_gradients_agree_with_finite_differences():
    xs = np.linspace(-3, 3, 13)
    for f in (ArctanRidge(2.0, 0.5, 1.5, 1.0), PhiField(-1.0), AffineField([0.3])):
        assert derivative_self_check(f, xs)
        assert np.allclose(f.grad(xs[:, None]), fd_grad(f, xs[:, None]), rtol=1e-6, atol=1e-8)


def test_field_algebra():
    f, g = ArctanRidge(), ConstantField(2.0)
    x = np.array([[0.3], [1.7]])
    assert np.allclose((f * g).values(x), 2 * np.arctan(x[:, 0]))
    assert np.allclose((f + g).grad(x)[:, 0], 1 / (1 + x[:, 0] ** 2))


def test_derivative_norm_on_example31_is_one_sided():
    chart = FinslerChart([[-10, 10]], Example31Field(), (3,))
    # df = 1/(1+x^2) for arctan: the forward cost equals it exactly
    assert derivative_asym_norm(chart, ArctanRidge(), 4.0) == pytest.approx(1.0)
    # f = -phi climbs backward: ratio (x^2/(1+x^2)) / (2 - 1/(1+x^2))
    x = 4.0
    expected = (x * x / (1 + x * x)) / (2 - 1 / (1 + x * x))
    assert derivative_asym_norm(chart, PhiField(-1.0), x) == pytest.approx(expected)


def test_sup_of_constant_is_zero_and_divergence_flag():
    chart = FinslerChart([[-1e4, 1e4]], Example31Field(), (3,))
    xs = np.linspace(-1e4, 1e4, 101)
    assert sup_derivative_norm(chart, ConstantField(1.0), xs).supremum == 0.0
    prof = sup_derivative_norm(chart, AffineField([1.0]), xs)
    assert prof.diverges and math.isinf(prof.supremum)


def test_slip_equals_derivative_sup_for_arctan():
    chart = FinslerChart([[-50, 50]], Example31Field(), (3,))
    rep = verify_slip_equals_derivative_sup(chart, ArctanRidge(), np.linspace(-50, 50, 801), tol=1e-6)
    assert rep.passed and rep.s1 == pytest.approx(1.0, abs=1e-6)


def test_chain_slip_matches_bruteforce(rng):
    chart = FinslerChart([[-5, 5]], Example31Field(), (3,))
    xs = np.sort(rng.uniform(-5, 5, 25))
    fv = rng.normal(size=25)
    assert chain_slip_1d(chart, xs, fv) == pytest.approx(slip_constant_bruteforce(fv, grid_quasi_metric_1d(chart, xs)))


def test_soft_truncation_error_bound():
    t = np.linspace(-1, 3, 4001)
    for a in (0.01, 0.2, 0.5):
        assert np.max(np.abs(soft_truncation(t, a) - np.minimum(t, 1))) <= a / 4 + 1e-15


def test_mollified_table_is_c1_and_close():
    xs = np.linspace(0, 1, 11)
    tab = TabulatedField(xs, np.abs(xs - 0.5))
    g = MollifiedField(tab, 0.05)
    t = np.linspace(0, 1, 2001)[:, None]
    assert np.max(np.abs(g.values(t) - tab.values(t))) <= 0.05
    d = g.grad(t)[:, 0]
    assert np.max(np.abs(np.diff(d))) < 0.05
    with pytest.raises(MalformedInputError):
        MollifiedField(tab, 0.0)


def test_smooth_approximation_meets_both_bounds():
    chart = FinslerChart([[-3, 3]], Example31Field(), (3,))
    xs = np.linspace(-3, 3, 61)
    tab = TabulatedField(xs, np.abs(np.sin(2 * xs)))
    g, rep = smooth_approximate_1d(chart, tab, 1e-2, 1e-2, return_report=True)
    assert rep.max_error <= 1e-2 and rep.slip_g <= rep.slip_f + 1e-2


def test_smoothing_gives_up_loudly():
    chart = FinslerChart([[-3, 3]], Example31Field(), (3,))
    xs = np.linspace(-3, 3, 7)
    tab = TabulatedField(xs, np.abs(xs))
    with pytest.raises(ApproximationFailedError):
        smooth_approximate_1d(chart, tab, 1e-9, 1e-12, width=1e-3, min_width=5e-4)


def test_example34_bounds():
    chart = FinslerChart([[-1e4, 1e4]], Example31Field(), (3,))
    rep = example34_ratio_experiment(chart, {"arctan": ArctanRidge(), "u": AffineField([1.0])})
    assert all(r["lower_bound_holds"] for r in rep.values())
    assert rep["u"]["diverges"] and not rep["arctan"]["diverges"]


def test_field_from_spec_roundtrip():
    f = ArctanRidge([1.0, -2.0], 0.1, 3.0, 4.0)
    g = field_from_spec(f.spec(), 2)
    X = np.random.default_rng(1).normal(size=(5, 2))
    assert np.allclose(f.values(X), g.values(X))


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 5.0), st.floats(-2, 2), st.floats(0.1, 4.0))
def test_euclidean_slip_is_lipschitz_constant(k, b, s):
    chart = FinslerChart([[-5, 5]], EuclideanField(1), (3,))
    f = ArctanRidge(k, b, s)
    rep = verify_slip_equals_derivative_sup(chart, f, np.linspace(-5, 5, 401), tol=1e-2)
    assert rep.passed
    assert rep.s2 <= k * s * (1 + 1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.1, 10))
def test_slip_is_homogeneous_under_scaling(seed, lam):
    rng = np.random.default_rng(seed)
    chart = FinslerChart([[-5, 5]], Example31Field(), (3,))
    xs = np.sort(rng.uniform(-5, 5, 12))
    fv = rng.normal(size=12)
    s = chain_slip_1d(chart, xs, fv)
    assert chain_slip_1d(chart, xs, lam * fv) == pytest.approx(lam * s, rel=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_local_to_global_on_the_line(seed):
    """The pairwise slip never exceeds the sup of the derivative norm."""
    rng = np.random.default_rng(seed)
    chart = FinslerChart([[-8, 8]], Example31Field(), (3,))
    f = ArctanRidge(rng.uniform(0.2, 3), rng.normal(), rng.uniform(0.5, 2))
    xs = np.sort(rng.uniform(-8, 8, 30))
    dense = np.linspace(-8, 8, 4001)
    assert chain_slip_1d(chart, xs, f.values(xs[:, None])) <= sup_derivative_norm(chart, f, dense).supremum * (1 + 1e-3)
