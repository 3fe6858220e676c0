"""Weight-class diagnostics and transform tests."""

import math

import numpy as np
import pytest

from odeasym.weights import (DEFAULT_HORIZONS, DEFAULT_THETA_SET,
                             NonPositiveWeightError, WeightClass,
                             WeightFunction, conv_exp_ratio, ensure_verified,
                             integral_transforms, log_derivative_rate,
                             smooth_delta, verify_non_decreasing,
                             verify_subexponential)


def W(text, cls=WeightClass.SUBEXPONENTIAL, rate=None):
    return WeightFunction.from_expression(text, cls, rate)


class TestSubexponentialVerification:

    def test_quadratic_weight_passes(self):
        diag = verify_subexponential(W("(1+t)^2"), theta_set=(0.5, 1.0, 2.0),
                                     horizons=(1e2, 1e3, 1e4))
        assert diag.verdict == "pass"
        # exact ratio ((1+t-theta)/(1+t))^2 puts the deviation near
        # 2*theta/T at the top horizon
        assert diag.worst_deviation == pytest.approx(4.0 / 1e4, rel=0.01)

    def test_exponential_weight_fails_with_exact_ratio(self):
        diag = verify_subexponential(W("exp(t)"))
        assert diag.verdict == "fail"
        for (T, theta, ratio) in diag.ratio_samples:
            if T == diag.horizon:
                assert ratio == pytest.approx(math.exp(-theta), abs=1e-3)

    def test_constant_weight_trivially_passes(self):
        diag = verify_subexponential(W("1"))
        assert diag.verdict == "pass"
        assert diag.worst_deviation == 0.0

    @pytest.mark.parametrize("text", [
        "(1+t)^2", "exp(sqrt(1+t))", "1", "sqrt(1+t)*log(2+t)"])
    def test_battery_passes_at_default_settings(self, text):
        assert verify_subexponential(W(text)).verdict == "pass"

    def test_superexponential_fails_with_capped_horizons(self):
        diag = verify_subexponential(W("exp(exp(t))"))
        assert diag.verdict == "fail"
        assert "capped" in diag.notes

    def test_scale_invariance_of_verdict(self):
        base = verify_subexponential(W("sqrt(1+t)*log(2+t)"))
        for c in (0.5, 2.0, 1024.0):
            scaled = verify_subexponential(W(f"{c}*(sqrt(1+t)*log(2+t))"))
            assert scaled.verdict == base.verdict
            assert scaled.worst_deviation == pytest.approx(
                base.worst_deviation, rel=1e-12)

    def test_non_positive_weight_reports_location(self):
        with pytest.raises(NonPositiveWeightError) as err:
            verify_subexponential(W("t-50"), theta_set=(1.0,),
                                  horizons=(100.0, 1000.0))
        assert "t=" in str(err.value)


class TestMonotoneVerification:

    def test_increasing_passes(self):
        assert verify_non_decreasing(W("1+t^2"), 50.0).verdict == "pass"

    def test_decreasing_fails(self):
        assert verify_non_decreasing(W("exp(-t)"), 50.0).verdict == "fail"

    def test_ensure_verified_gates_unverified(self):
        ok, reason = ensure_verified(W("1", WeightClass.UNVERIFIED), 10.0)
        assert not ok and "unverified" in reason
        w = W("1+t", WeightClass.NON_DECREASING)
        ok, _ = ensure_verified(w, 10.0)
        assert ok and w.verification is not None


class TestSmoothing:

    def test_constant_weight_unchanged(self):
        s = smooth_delta(W("1"), delta=3.0)
        assert s(7.0) == pytest.approx(1.0, abs=1e-12)
        assert s.declared_class == WeightClass.SUBEXPONENTIAL

    def test_affine_weight_shifts_by_half_window(self):
        # (1/2) int_t^{t+2} (s+1) ds = t + 2
        s = smooth_delta(W("t+1", WeightClass.NON_DECREASING), delta=2.0)
        for t in (0.0, 1.0, 10.0, 123.0):
            assert s(t) == pytest.approx(t + 2.0, rel=1e-12)

    def test_tracks_quadratic_weight(self):
        s = smooth_delta(W("(1+t)^2"), delta=1.0)
        t = 1000.0
        ratio = s(t) / (1.0 + t) ** 2
        assert 1.0 <= ratio <= 1.01

    def test_mean_value_property(self):
        w = W("2+sin(t)")
        s = smooth_delta(w, delta=0.7)
        grid = np.linspace(0.0, 20.0, 101)
        smoothed = s(grid)
        for t, v in zip(grid, smoothed):
            window = w(np.linspace(t, t + 0.7, 64))
            assert np.min(window) - 1e-9 <= v <= np.max(window) + 1e-9

    def test_rejects_nonpositive_window(self):
        with pytest.raises(ValueError):
            smooth_delta(W("1"), delta=0.0)


class TestIntegralTransforms:

    def test_constant_head_and_divergent_tail(self):
        tr = integral_transforms(W("1"), t=5.0, tail_horizon=40.0)
        assert tr.head == pytest.approx(5.0, abs=1e-12)
        assert tr.tail is None and tr.tail_reason

    def test_decaying_tail_converges_to_one(self):
        tr = integral_transforms(W("exp(-t)"), t=0.0, tail_horizon=60.0)
        assert tr.tail == pytest.approx(1.0, abs=1e-9)

    def test_linear_head(self):
        tr = integral_transforms(W("t"), t=2.0, tail_horizon=50.0)
        assert tr.head == pytest.approx(2.0, abs=1e-12)


class TestLogDerivativeRate:

    def test_power_weight_classifies_zero(self):
        est = log_derivative_rate(W("(1+t)^2"))
        assert est.classification == "zero"
        for T, value in est.samples:
            assert value == pytest.approx(2.0 / (1.0 + T), rel=1e-9)

    def test_exponential_weight_gives_its_rate(self):
        est = log_derivative_rate(W("exp(3*t)"), horizons=(5.0, 10.0, 20.0))
        assert est.classification == "finite"
        assert est.rate == pytest.approx(3.0, abs=1e-10)

    def test_doubly_exponential_classifies_infinite(self):
        est = log_derivative_rate(W("exp(exp(t))"), horizons=(3.0, 4.5, 6.0))
        assert est.classification == "infinite"
        assert est.rate == math.inf

    def test_callable_weight_rejected(self):
        from odeasym.expr import ScalarFunction
        w = WeightFunction(ScalarFunction.from_callable(lambda t: t + 1.0))
        with pytest.raises(ValueError):
            log_derivative_rate(w)


class TestConvolutionRatio:

    def test_constant_weight_closed_form(self):
        v = conv_exp_ratio(W("1"), alpha=1.0, t=20.0)
        assert v == pytest.approx(1.0 - math.exp(-20.0), abs=1e-8)

    @pytest.mark.parametrize("alpha", [1.0, 2.0])
    def test_quadratic_weight_near_unit_ratio(self, alpha):
        v = conv_exp_ratio(W("(1+t)^2"), alpha=alpha, t=200.0)
        assert abs(v - 1.0) < 0.02

    def test_deviation_shrinks_with_horizon(self):
        for text in ("1", "(1+t)^2", "sqrt(1+t)*log(2+t)"):
            w = W(text)
            d1 = abs(conv_exp_ratio(w, 1.0, 100.0) - 1.0)
            d2 = abs(conv_exp_ratio(w, 1.0, 200.0) - 1.0)
            assert d2 <= d1 + 1e-3

    def test_rejects_bad_arguments(self):
        with pytest.raises(ValueError):
            conv_exp_ratio(W("1"), alpha=0.0, t=10.0)


def test_defaults_match_documented_values():
    assert DEFAULT_THETA_SET == (0.25, 0.5, 1.0, 2.0)
    assert DEFAULT_HORIZONS == (1e2, 1e3, 1e4)
