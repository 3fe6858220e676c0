"""Quadrature engine tests against closed-form integrals."""

import math

import numpy as np
import pytest

from odeasym.quadrature import (QuadratureError, adaptive_quad, batch_quad,
                                gl15_batch, prefix_on_grid,
                                weighted_step_panels)


def test_polynomial_exact():
    assert adaptive_quad(lambda x: x ** 3, 0.0, 2.0, 1e-12) == pytest.approx(
        4.0, abs=1e-13)


def test_sine_closed_form():
    assert adaptive_quad(np.sin, 0.0, math.pi, 1e-12) == pytest.approx(
        2.0, abs=1e-12)


def test_oscillatory_closed_form():
    f = lambda x: 2 * x * np.sin(x ** 2)
    exact = math.cos(1.0) - math.cos(4.0)
    assert adaptive_quad(f, 1.0, 2.0, 1e-10) == pytest.approx(exact, abs=1e-9)


def test_orientation_and_empty():
    assert adaptive_quad(np.cos, 1.0, 1.0) == 0.0
    a = adaptive_quad(np.exp, 0.0, 1.0, 1e-12)
    b = adaptive_quad(np.exp, 1.0, 0.0, 1e-12)
    assert a == pytest.approx(-b, rel=1e-14)


def test_interval_additivity():
    f = lambda x: np.exp(-x) * np.sin(3 * x)
    whole = adaptive_quad(f, 0.0, 5.0, 1e-12)
    split = adaptive_quad(f, 0.0, 2.2, 1e-12) + adaptive_quad(f, 2.2, 5.0, 1e-12)
    assert whole == pytest.approx(split, abs=1e-11)


def test_rapid_oscillation_subdivides():
    f = lambda x: np.sin(200.0 * x)
    exact = (1.0 - math.cos(200.0 * 3.0)) / 200.0
    assert adaptive_quad(f, 0.0, 3.0, 1e-11) == pytest.approx(exact, abs=1e-10)


def test_budget_exhaustion_names_interval():
    # a genuine jump cannot be resolved to 1e-15 within two levels
    f = lambda x: np.where(x < 0.37, 0.0, 1.0)
    with pytest.raises(QuadratureError) as err:
        adaptive_quad(f, 0.0, 1.0, 1e-15, max_depth=2)
    lo, hi = err.value.worst_interval
    assert 0.0 <= lo < 0.37 < hi <= 1.0


def test_non_finite_integrand_reported():
    with pytest.raises(QuadratureError):
        adaptive_quad(lambda x: 1.0 / (x - 0.3), 0.0, 1.0, 1e-9)


def test_batch_matches_scalar():
    f = lambda x: np.cos(x) * np.exp(-0.1 * x)
    a = np.array([0.0, 1.0, 2.5])
    b = np.array([1.0, 4.0, 2.5])
    out = batch_quad(f, a, b, 1e-11)
    for ai, bi, v in zip(a, b, out):
        assert v == pytest.approx(adaptive_quad(f, ai, bi, 1e-12), abs=1e-10)


def test_gl15_batch_smooth_panel():
    out = gl15_batch(np.exp, np.array([0.0]), np.array([0.5]))
    assert out[0] == pytest.approx(math.exp(0.5) - 1.0, rel=1e-14)


def test_weighted_step_panels_constant_forcing():
    h, n = 0.01, 500
    q = weighted_step_panels(lambda x: np.ones_like(x), 0.0, h, n, rate=-1.0,
                             tol=1e-12)
    assert np.allclose(q, 1.0 - math.exp(-h), atol=1e-15)


def test_weighted_step_panels_growth_kernel():
    # int_0^h e^{+(h-u)} e^{u} du = h e^{h} per step for f = e^t at t0 = 0
    h, n = 0.05, 40
    f = lambda x: np.exp(x)
    q = weighted_step_panels(f, 0.0, h, n, rate=1.0, tol=1e-13)
    starts = h * np.arange(n)
    expected = h * np.exp(h) * np.exp(starts)
    assert np.allclose(q, expected, rtol=1e-12)


def test_prefix_on_grid_matches_antiderivative():
    f = lambda x: 2 * x * np.sin(x ** 2)
    P = prefix_on_grid(f, 0.0, 0.01, 1000, tol=1e-12)
    t = 0.01 * np.arange(1001)
    assert np.max(np.abs(P - (1.0 - np.cos(t ** 2)))) < 1e-10


def test_huge_scale_integrand_terminates_at_rounding_floor():
    # conditioning of exp at large arguments dominates; the run must
    # finish fast and stay accurate in relative terms
    f = lambda x: np.exp(2 * x) * np.cos(x)
    n = 3000
    h = 30.0 / n
    q = weighted_step_panels(f, 0.0, h, n, rate=0.0, tol=1e-9)
    total = np.sum(q)
    exact = (math.exp(60) * (2 * math.cos(30) + math.sin(30)) - 2.0) / 5.0
    assert total == pytest.approx(exact, rel=1e-10)
