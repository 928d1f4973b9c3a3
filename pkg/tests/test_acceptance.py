"""Every acceptance criterion at its stated tolerance, one pass/fail line each.

The lines are printed as the tests run (visible with ``-s``) and repeated in
the terminal summary.
"""
import pytest

from finslerslip import acceptance as acc

pytestmark = pytest.mark.acceptance

RESULTS = []

CRITERIA = [acc.criterion_1, acc.criterion_2, acc.criterion_3, acc.criterion_4, acc.criterion_5,
            acc.criterion_6, acc.criterion_7, acc.criterion_8, acc.criterion_9, acc.criterion_10]


@pytest.mark.parametrize("criterion", CRITERIA, ids=[f"criterion_{k}" for k in range(1, 11)])
def test_criterion(criterion):
    r = criterion()
    RESULTS.append(r.line())
    print(r.line())
    assert r.passed, r.detail


def test_shifted_oracle_is_caught():
    r = acc.criterion_1(oracle_shift=1e-2)
    print("mutation (oracle shifted by 1e-2):", r.line())
    assert not r.passed


def test_coarse_grid_is_caught_with_diagnostic():
    r = acc.criterion_1(grid_step=0.5)
    print("mutation (grid step 0.5):", r.line())
    assert not r.passed
    assert "diagnostic" in r.detail


def test_shifted_decay_reference_is_caught():
    assert not acc.criterion_2(oracle_shift=1e-2).passed
