import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from finslerslip.conealg import Functional, eval_functional, functional_apply
from finslerslip.errors import MalformedInputError, OutOfDomainError
from finslerslip.fields import ArctanRidge, ProductField, SumField, shifted_arctan
from finslerslip.finsler import (EuclideanField, Example31Field, FinslerChart, RandersField,
                                 chart_index_of_symmetry)
from finslerslip.isometry import (AffineMap, CompositionOperator, IdentityMap, MonotoneTableMap, TranslationMap,
                                  check_finsler_isometry, check_metric_isometry, map_from_spec, map_self_check,
                                  map_slip_constants, myers_nakai_consistency, random_pairs,
                                  symmetry_sign_compatibility)
from finslerslip.quasimetric import index_of_symmetry, space_from_json


@pytest.fixture(scope="module")
def randers_pair():
    X = FinslerChart([[-5.0, 5.0]], RandersField([-0.3]), (21,))
    Y = FinslerChart([[-3.0, 7.0]], RandersField([-0.3]), (21,))
    return X, Y


def test_translation_is_isometry(randers_pair, rng):
    X, Y = randers_pair
    h = TranslationMap([2.0])
    assert check_finsler_isometry(X, Y, h, np.linspace(-5, 5, 11), [1.0, -1.0]).passed
    rep = check_metric_isometry(X, Y, h, random_pairs(X, 200, rng))
    assert rep.passed and rep.agrees_with_finsler


def test_reflection_is_not_isometry_of_randers(rng):
    X = FinslerChart([[-5.0, 5.0]], RandersField([-0.3]), (21,))
    h = AffineMap([[-1.0]])
    assert not check_finsler_isometry(X, X, h, [0.0, 1.0], [1.0]).passed
    rep = check_metric_isometry(X, X, h, random_pairs(X, 200, rng))
    assert not rep.passed and rep.agrees_with_finsler


def test_identity_euclidean_to_randers_slip_constants(rng):
    X = FinslerChart([[-1, 1], [-1, 1]], EuclideanField(2), (5, 5))
    Y = FinslerChart([[-1, 1], [-1, 1]], RandersField([0.5, 0.0]), (5, 5))
    s, s_inv = map_slip_constants(IdentityMap(2), X, Y, random_pairs(X, 4000, rng))
    assert 1.5 * 0.98 <= s <= 1.5 + 1e-12
    assert 2.0 * 0.98 <= s_inv <= 2.0 + 1e-12


def test_map_spec_and_self_check():
    h = map_from_spec({"family": "tabulated-1d-monotone", "params": {"xs": [0, 1, 2, 3], "ys": [0, 2, 3, 7]}})
    rt, jd = map_self_check(h, np.linspace(0.1, 2.9, 9))
    assert rt < 1e-9 and jd < 1e-4
    with pytest.raises(OutOfDomainError):
        h.forward(np.array([[4.0]]))
    with pytest.raises(MalformedInputError):
        map_from_spec({"family": "translation"})
    with pytest.raises(MalformedInputError):
        MonotoneTableMap([0, 1, 2], [0, 2, 1])


def test_composition_operator_adjoint_and_inverse(randers_pair):
    X, Y = randers_pair
    T = CompositionOperator(TranslationMap([2.0]), Y, X)
    f = shifted_arctan()
    phi = eval_functional(1.5, X) - eval_functional(-0.5, X)
    assert functional_apply(phi, T.apply_field(f)) == pytest.approx(functional_apply(T.adjoint(phi), f))
    back = T.inverse()
    g = back.apply_field(T.apply_field(f))
    G = Y.grid_points()[2:-2]
    assert np.allclose(g.values(G), f.values(G))


def test_translation_consistency(randers_pair, rng):
    X, Y = randers_pair
    rep = myers_nakai_consistency(X, Y, TranslationMap([2.0]), tol=1e-3, rng=rng)
    assert rep.consistent and rep.clauses["c"]
    assert 1 - 1e-3 <= rep.norm_T <= 1 + 1e-12


def test_sign_compatibility_verdicts():
    line = FinslerChart([[0.0, 60.0]], Example31Field(), (3,))
    rep31 = chart_index_of_symmetry(line, [(x, x + 1.0) for x in (0.0, 5.0, 20.0, 50.0)])
    euc = FinslerChart([[0.0, 60.0]], EuclideanField(1), (3,))
    rep_e = chart_index_of_symmetry(euc, [(0.0, 1.0)])
    assert symmetry_sign_compatibility(rep31, rep_e)["verdict"] == "incompatible"
    assert symmetry_sign_compatibility(rep_e, rep_e)["verdict"] == "compatible"
    sp = index_of_symmetry(space_from_json({"dist": [[0, 1], [4, 0]]}))
    assert symmetry_sign_compatibility(sp, rep_e)["verdict"] == "compatible"


@settings(max_examples=25, deadline=None)
@given(st.floats(0.2, 3), st.floats(-1, 1), st.floats(0.2, 3), st.floats(-1, 1), st.floats(-2, 2))
def test_composition_is_multiplicative_and_linear(k1, b1, k2, b2, c):
    X = FinslerChart([[-5.0, 5.0]], RandersField([-0.3]), (21,))
    Y = FinslerChart([[-20.0, 20.0]], RandersField([-0.3]), (21,))
    T = CompositionOperator(AffineMap([[1.7]], [c]), Y, X)
    f, g = ArctanRidge(k1, b1), ArctanRidge(k2, b2)
    P = X.grid_points()
    Tf, Tg = T.apply_field(f).values(P), T.apply_field(g).values(P)
    assert np.allclose(T.apply_field(ProductField(f, g)).values(P), Tf * Tg, atol=1e-12)
    assert np.allclose(T.apply_field(SumField([f, g], [2.0, -1.0])).values(P), 2 * Tf - Tg, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(st.floats(-4.9, 4.9), st.floats(-3, 3)), min_size=1, max_size=4), st.floats(-1, 1))
def test_adjoint_identity(atoms, c):
    X = FinslerChart([[-5.0, 5.0]], RandersField([-0.3]), (21,))
    Y = FinslerChart([[-20.0, 20.0]], RandersField([-0.3]), (21,))
    T = CompositionOperator(AffineMap([[1.7]], [c]), Y, X)
    phi = Functional(list(atoms))
    f = ArctanRidge(1.3, 0.2, 1.0, math.pi / 2)
    assert functional_apply(phi, T.apply_field(f)) == pytest.approx(functional_apply(T.adjoint(phi), f), abs=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.floats(-0.6, 0.6), st.floats(-0.6, 0.6), st.floats(-2, 2), st.floats(-2, 2))
def test_translations_preserve_constant_randers(b1, b2, c1, c2):
    if b1 * b1 + b2 * b2 >= 0.8:
        return
    F = RandersField([b1, b2])
    X = FinslerChart([[-1, 1], [-1, 1]], F, (3, 3))
    Y = FinslerChart([[-3, 3], [-3, 3]], F, (3, 3))
    rep = check_finsler_isometry(X, Y, TranslationMap([c1, c2]), X.grid_points(), np.eye(2), 1e-12)
    assert rep.passed
