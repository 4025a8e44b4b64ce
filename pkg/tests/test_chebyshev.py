import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from paradecomp.chebyshev import (
    BOUND_NAMES,
    scalar_bounds_check,
    two_variable_bound,
    u2_eval,
    u_classical,
    u_recurrence,
    u_table,
)


def test_initial_polynomials():
    assert u2_eval(0, 0.3, 7.0) == 1.0
    assert u2_eval(1, 0.3, 7.0) == 0.3


def test_one_recurrence_step():
    assert u2_eval(2, 1.5, 0.25) == pytest.approx(1.5**2 - 0.25, rel=1e-15)


def test_u2_at_half():
    assert u_classical(2, 0.5) == pytest.approx(0.0, abs=1e-15)
    assert u_recurrence(2, 0.5) == 0.0


@pytest.mark.parametrize("k", range(8))
def test_classical_at_zero(k):
    expected = 0.0 if k % 2 else (-1.0) ** (k // 2)
    assert u_classical(k, 0.0) == pytest.approx(expected, abs=1e-15)


def test_recurrence_vs_closed_form():
    x = np.linspace(-0.99, 0.99, 199)
    table = u_table(100, x)
    for k in range(101):
        closed = np.sin((k + 1) * np.arccos(x)) / np.sqrt(1 - x * x)
        assert np.abs(table[k] - closed).max() <= 1e-10


def test_closed_form_near_endpoint_uses_recurrence():
    x = 1 - 1e-12
    assert u_classical(5, x) == pytest.approx(6.0, rel=1e-9)


def test_homogeneity_grid():
    rng = np.random.default_rng(0)
    for _ in range(200):
        y = rng.uniform(0.01, 4.0)
        x = rng.uniform(-1.9, 1.9) * math.sqrt(y)
        for k in range(51):
            ref = y ** (k / 2) * u_classical(k, x / (2 * math.sqrt(y)))
            val = u2_eval(k, x, y)
            assert abs(val - ref) <= 1e-12 * max(1.0, abs(ref), y ** (k / 2))


@settings(max_examples=200, deadline=None)
@given(
    k=st.integers(0, 50),
    y=st.floats(0.05, 4.0),
    s=st.floats(-0.99, 0.99),
)
def test_homogeneity_property(k, y, s):
    x = 2 * s * math.sqrt(y)
    ref = y ** (k / 2) * u_classical(k, s)
    assert abs(u2_eval(k, x, y) - ref) <= 1e-12 * max(1.0, y ** (k / 2) * (k + 1))


def test_scalar_bounds_random_samples():
    x = np.random.default_rng(1).uniform(-1, 1, 10_000)
    x = x[np.abs(x) < 1]
    report = scalar_bounds_check(200, x)
    assert report.ok, report.violations[:3]
    assert set(report.worst_margin) == set(BOUND_NAMES)


def test_scalar_bounds_endpoint_stress():
    report = scalar_bounds_check(200, [1 - 1e-6, -(1 - 1e-6)])
    assert report.ok


def test_k0_shifted_bound_is_tight():
    report = scalar_bounds_check(0, [0.3])
    assert report.ok
    assert report.worst_margin["shifted"] == 0.0


def test_samples_outside_interval_rejected():
    with pytest.raises(ValueError):
        scalar_bounds_check(3, [1.0])


def test_two_variable_bound_holds():
    for k in range(30):
        for x, y in [(0.5, 1.0), (1.0, 0.5), (-0.3, 0.1)]:
            assert abs(u2_eval(k, x, y)) <= two_variable_bound(k, x, y) * (1 + 1e-12)


def test_two_variable_bound_outside_region():
    assert two_variable_bound(3, 3.0, 1.0) == math.inf
    assert two_variable_bound(3, 0.1, 0.0) == math.inf


def test_negative_degree():
    with pytest.raises(ValueError):
        u2_eval(-1, 0.0, 1.0)
