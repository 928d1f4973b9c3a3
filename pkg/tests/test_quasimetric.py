import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from finslerslip.errors import InvalidStructureError, MalformedInputError
from finslerslip.quasimetric import (QUASI_HEMI_METRIC, QuasiMetricSpace, index_of_symmetry, random_space,
                                     slip0_linearity, slip_constant, slip_constant_bruteforce, space_from_json,
                                     validate_space)


def test_metric_matrix_has_no_violations():
    sp = space_from_json({"dist": [[0, 1], [1, 0]]})
    assert validate_space(sp) == []
    assert index_of_symmetry(sp).index == 1.0


def test_index_of_two_point_space():
    rep = index_of_symmetry(space_from_json({"dist": [[0, 1], [4, 0]]}))
    assert rep.index == pytest.approx(0.25)
    assert rep.is_exact


def test_triangle_violation_is_reported():
    D = [[0, 1, 5], [1, 0, 1], [1, 1, 0]]
    kinds = {v.axiom for v in validate_space(QuasiMetricSpace.from_matrix(D, mode=QUASI_HEMI_METRIC))}
    assert "triangle" in kinds


def test_malformed_matrix_rejected():
    with pytest.raises((MalformedInputError, InvalidStructureError)):
        space_from_json({"dist": [[0, 1, 2], [1, 0]]})


def test_slip_of_distance_function_is_one(rng):
    sp = random_space(8, rng)
    for p in sp.points:
        assert slip_constant(sp.distance_function(p), sp) == pytest.approx(1.0, abs=1e-12)


def test_hemi_metric_zero_forward_distance_gives_infinite_slip():
    sp = QuasiMetricSpace.from_matrix([[0, 0], [1, 0]], mode=QUASI_HEMI_METRIC)
    assert math.isinf(slip_constant([0.0, 1.0], sp))
    assert slip_constant([1.0, 0.0], sp) == pytest.approx(1.0)


def test_linearity_fails_with_witness():
    sp = QuasiMetricSpace.from_matrix([[0, 0], [1, 0]], mode=QUASI_HEMI_METRIC)
    v = slip0_linearity(sp)
    assert not v.linear
    w = np.array([v.witness[p] for p in sp.points])
    assert math.isfinite(slip_constant(w, sp)) and math.isinf(slip_constant(-w, sp))


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 9), st.integers(0, 2**32 - 1))
def test_slip_matches_bruteforce(n, seed):
    rng = np.random.default_rng(seed)
    sp = random_space(n, rng)
    f = rng.normal(size=n)
    assert slip_constant(f, sp) == pytest.approx(slip_constant_bruteforce(f, sp), rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 9), st.integers(0, 2**32 - 1), st.floats(0.1, 10.0))
def test_slip_is_positively_homogeneous_and_shift_invariant(n, seed, lam):
    rng = np.random.default_rng(seed)
    sp = random_space(n, rng)
    f = rng.normal(size=n)
    s = slip_constant(f, sp)
    assert slip_constant(lam * f + 3.0, sp) == pytest.approx(lam * s, rel=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 9), st.integers(0, 2**32 - 1))
def test_symmetrized_space_has_index_one(n, seed):
    sp = random_space(n, np.random.default_rng(seed))
    D = np.asarray(sp.dist, dtype=float)
    sym = QuasiMetricSpace.from_matrix(np.maximum(D, D.T))
    assert index_of_symmetry(sym).index == pytest.approx(1.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 9), st.integers(0, 2**32 - 1))
def test_linearity_verdict_tracks_index(n, seed):
    sp = random_space(n, np.random.default_rng(seed), QUASI_HEMI_METRIC)
    assert slip0_linearity(sp).linear == (index_of_symmetry(sp).index > 0)
