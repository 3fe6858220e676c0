"""Weight functions and their class diagnostics.

A weight is a positive function of t that normalises solution sizes.  The
classes that matter here are non-decreasing weights, finite-lag
subexponential weights (gamma(t - lag) / gamma(t) -> 1 for every fixed
lag), and exponential-rate weights (gamma'/gamma -> beta).  Limits at
infinity are not decidable from samples, so every verification is a
finite-horizon trend test with an explicit inconclusive state, and the
diagnostic record keeps the evidence.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .expr import ScalarFunction
from .quadrature import DEFAULT_TOL, adaptive_quad, batch_quad

DEFAULT_THETA_SET = (0.25, 0.5, 1.0, 2.0)
DEFAULT_HORIZONS = (1e2, 1e3, 1e4)
DEFAULT_CLASS_TOL = 1e-2

#: relative change under which a doubled tail integral counts as converged
TAIL_REL_TOL = 1e-8


class NonPositiveWeightError(ValueError):
    """A weight sample came out non-positive; the message names t."""


class WeightClass(enum.Enum):
    NON_DECREASING = "non_decreasing"
    SUBEXPONENTIAL = "subexponential"
    EXPONENTIAL_RATE = "exponential_rate"
    UNVERIFIED = "unverified"


@dataclass
class WeightDiagnostic:
    """Evidence from a finite-horizon class verification."""

    ratio_samples: List[Tuple[float, float, float]]
    worst_deviation: float
    horizon: float
    verdict: str                       # "pass" | "fail" | "inconclusive"
    deviations: List[Tuple[float, float]] = field(default_factory=list)
    notes: str = ""

    def as_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "worst_deviation": self.worst_deviation,
            "horizon": self.horizon,
            "deviations": [list(d) for d in self.deviations],
            "ratio_samples": [list(s) for s in self.ratio_samples],
            "notes": self.notes,
        }


@dataclass
class WeightFunction:
    """A positive weight with a declared class and optional verification."""

    func: ScalarFunction
    declared_class: WeightClass = WeightClass.UNVERIFIED
    rate: Optional[float] = None       # for EXPONENTIAL_RATE; may be inf
    verification: Optional[WeightDiagnostic] = None

    @classmethod
    def from_expression(cls, text: str,
                        declared_class: WeightClass = WeightClass.UNVERIFIED,
                        rate: Optional[float] = None) -> "WeightFunction":
        return cls(ScalarFunction.from_expression(text),
                   declared_class=declared_class, rate=rate)

    @property
    def label(self) -> str:
        return self.func.label

    def __call__(self, t):
        return self.func(t)


def _check_positive(gamma: WeightFunction, points: np.ndarray) -> None:
    vals = np.asarray(gamma(points), dtype=float)
    bad = ~(vals > 0.0) & np.isfinite(vals)
    if np.any(bad):
        t_bad = float(np.asarray(points)[bad][0])
        raise NonPositiveWeightError(
            f"weight {gamma.label!r} is non-positive at t={t_bad!r}")


def _finite_at(gamma: WeightFunction, thetas: np.ndarray, T: float) -> bool:
    with np.errstate(all="ignore"):
        vals = np.asarray(gamma(np.concatenate(([T], T - thetas))),
                          dtype=float)
    return bool(np.all(np.isfinite(vals)))


def _usable_horizons(gamma: WeightFunction, thetas: np.ndarray,
                     horizons: Sequence[float]):
    """Drop horizons where the weight overflows the double range; if too
    few remain, fall back to a geometric ladder under the largest finite
    one.  Returns (horizons, note)."""
    horizons = sorted(float(T) for T in horizons)
    usable = [T for T in horizons if _finite_at(gamma, thetas, T)]
    if len(usable) >= 2:
        note = "" if len(usable) == len(horizons) else (
            f"horizons capped at {usable[-1]:g}: weight overflows beyond")
        return usable, note
    top = usable[-1] if usable else None
    if top is None:
        T = horizons[0]
        while T > 4.0 * thetas[-1]:
            T *= 0.5
            if _finite_at(gamma, thetas, T):
                top = T
                break
    if top is None:
        raise ValueError(
            f"weight {gamma.label!r} overflows at every usable horizon")
    lo = 2.1 * thetas[-1]
    if top <= lo * 1.01:
        raise ValueError("no overflow-free horizons clear of the lag set")
    bottom = max(top / 4.0, lo)
    ladder = [bottom, math.sqrt(bottom * top), top]
    return ladder, (f"horizons capped at {top:g}: weight overflows beyond")


def verify_subexponential(gamma: WeightFunction,
                          theta_set: Sequence[float] = DEFAULT_THETA_SET,
                          horizons: Sequence[float] = DEFAULT_HORIZONS,
                          tol: float = DEFAULT_CLASS_TOL) -> WeightDiagnostic:
    """Finite-lag subexponential trend test.

    For each horizon T the deviation is max over the lag set of
    |gamma(T - lag)/gamma(T) - 1|.  Verdict: pass when the deviation at
    the largest horizon is below tol and the deviations never grow across
    horizons; fail when the deviation has stabilised (or grows) above
    2*tol; otherwise inconclusive.  Horizons where the weight overflows
    are dropped (the diagnostic says so).
    """
    thetas = np.asarray(sorted(theta_set), dtype=float)
    if np.any(thetas <= 0.0):
        raise ValueError("lags must be positive")
    horizons = sorted(float(T) for T in horizons)
    if horizons[0] <= thetas[-1]:
        raise ValueError("smallest horizon must exceed the largest lag")
    horizons, cap_note = _usable_horizons(gamma, thetas, horizons)

    samples: List[Tuple[float, float, float]] = []
    deviations: List[Tuple[float, float]] = []
    for T in horizons:
        pts = np.concatenate(([T], T - thetas))
        _check_positive(gamma, pts)
        gT = float(gamma(np.array([T]))[0])
        ratios = np.asarray(gamma(T - thetas), dtype=float) / gT
        for theta, r in zip(thetas, ratios):
            samples.append((T, float(theta), float(r)))
        deviations.append((T, float(np.max(np.abs(ratios - 1.0)))))

    devs = [d for _, d in deviations]
    worst = devs[-1]
    non_increasing = all(devs[i + 1] <= devs[i] + 1e-12
                         for i in range(len(devs) - 1))
    stabilised = len(devs) >= 2 and devs[-1] >= 0.9 * devs[-2]
    if worst < tol and non_increasing:
        verdict = "pass"
    elif worst > 2.0 * tol and stabilised:
        verdict = "fail"
    else:
        verdict = "inconclusive"
    notes = "trend heuristic; limits at infinity are not decidable from samples"
    if cap_note:
        notes = f"{notes}; {cap_note}"
    return WeightDiagnostic(ratio_samples=samples, worst_deviation=worst,
                            horizon=horizons[-1], verdict=verdict,
                            deviations=deviations, notes=notes)


def verify_non_decreasing(gamma: WeightFunction, t_max: float,
                          n_samples: int = 1024,
                          tol: float = 1e-9) -> WeightDiagnostic:
    """Sampled monotonicity check on [0, t_max]."""
    pts = np.linspace(0.0, t_max, n_samples)
    _check_positive(gamma, pts)
    vals = np.asarray(gamma(pts), dtype=float)
    drops = vals[:-1] - vals[1:]
    worst = float(np.max(drops, initial=0.0))
    scale = float(np.max(np.abs(vals)))
    verdict = "pass" if worst <= tol * max(1.0, scale) else "fail"
    return WeightDiagnostic(ratio_samples=[], worst_deviation=worst,
                            horizon=t_max, verdict=verdict,
                            notes="sampled monotonicity check")


def ensure_verified(gamma: WeightFunction, t_max: float) -> Tuple[bool, str]:
    """Verify the declared class, caching the diagnostic on the weight.

    Returns (ok, reason).  Exponential-rate weights with non-negative rate
    count as non-decreasing for condition checks that need monotonicity.
    """
    if gamma.verification is not None and gamma.verification.verdict == "pass":
        return True, "already verified"
    cls = gamma.declared_class
    if cls == WeightClass.SUBEXPONENTIAL:
        diag = verify_subexponential(gamma)
    elif cls == WeightClass.NON_DECREASING:
        diag = verify_non_decreasing(gamma, t_max)
    elif cls == WeightClass.EXPONENTIAL_RATE:
        if gamma.rate is not None and gamma.rate < 0.0:
            return False, "declared exponential rate is negative"
        diag = verify_non_decreasing(gamma, t_max)
    else:
        return False, "weight class declared unverified"
    gamma.verification = diag
    if diag.verdict != "pass":
        return False, f"declared {cls.value} but verification {diag.verdict}"
    return True, "verified"


# --------------------------------------------------------------------------
# transforms
# --------------------------------------------------------------------------

def smooth_delta(gamma: WeightFunction, delta: float,
                 quad_tol: float = DEFAULT_TOL) -> WeightFunction:
    """Forward moving average of the weight over windows of length delta.

    The result evaluates (1/delta) * int_t^{t+delta} gamma(s) ds by
    quadrature and tracks gamma to within its window oscillation, so it
    inherits the subexponential (or non-decreasing) class of its input.
    """
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    base = gamma.func

    def fn(t):
        if isinstance(t, np.ndarray):
            flat = t.ravel().astype(float)
            out = batch_quad(base, flat, flat + delta, tol=quad_tol) / delta
            return out.reshape(t.shape)
        return adaptive_quad(base, float(t), float(t) + delta,
                             tol=quad_tol) / delta

    inherited = gamma.declared_class
    if inherited not in (WeightClass.SUBEXPONENTIAL,
                         WeightClass.NON_DECREASING):
        inherited = WeightClass.UNVERIFIED
    label = f"avg[{delta:g}]({gamma.label})"
    return WeightFunction(ScalarFunction.from_callable(fn, label=label),
                          declared_class=inherited)


@dataclass(frozen=True)
class IntegralTransforms:
    head: float                        # int_0^t gamma
    tail: Optional[float]              # int_t^inf gamma, when convergent
    tail_reason: Optional[str] = None


def integral_transforms(gamma: WeightFunction, t: float,
                        tail_horizon: float,
                        quad_tol: float = DEFAULT_TOL) -> IntegralTransforms:
    """Head integral int_0^t gamma and, when numerically convergent, the
    tail integral int_t^inf gamma.

    The tail counts as convergent when two successive doublings of the
    tail horizon change the value by less than 1e-8 relative.
    """
    if t < 0.0:
        raise ValueError("t must be non-negative")
    head = adaptive_quad(gamma.func, 0.0, t, tol=quad_tol) if t > 0 else 0.0
    if tail_horizon <= t:
        return IntegralTransforms(head, None, "tail horizon not beyond t")
    j0 = adaptive_quad(gamma.func, t, tail_horizon, tol=quad_tol)
    j1 = j0 + adaptive_quad(gamma.func, tail_horizon,
                            2.0 * tail_horizon, tol=quad_tol)
    j2 = j1 + adaptive_quad(gamma.func, 2.0 * tail_horizon,
                            4.0 * tail_horizon, tol=quad_tol)
    ok1 = abs(j1 - j0) < TAIL_REL_TOL * max(1.0, abs(j1))
    ok2 = abs(j2 - j1) < TAIL_REL_TOL * max(1.0, abs(j2))
    if ok1 and ok2:
        return IntegralTransforms(head, j2, None)
    return IntegralTransforms(
        head, None,
        f"tail increments not below {TAIL_REL_TOL:g} relative after two "
        f"doublings of horizon {tail_horizon:g}")


@dataclass(frozen=True)
class RateEstimate:
    """Samples of gamma'/gamma with a trend classification."""

    samples: List[Tuple[float, float]]
    classification: str                # "zero" | "finite" | "infinite"
    rate: float                        # inf for the infinite class

    def as_dict(self) -> dict:
        return {"samples": [list(s) for s in self.samples],
                "classification": self.classification, "rate": self.rate}


def log_derivative_rate(gamma: WeightFunction,
                        horizons: Sequence[float] = DEFAULT_HORIZONS,
                        zero_tol: float = 1e-3,
                        growth_cap: float = 100.0) -> RateEstimate:
    """Estimate the exponential rate gamma'(T)/gamma(T) across horizons.

    Classification: zero when the final sample is below zero_tol in
    magnitude; infinite when samples overflow, or keep at least doubling
    and end beyond growth_cap; otherwise finite with the last sample as
    the rate.
    """
    dgamma = gamma.func.derivative()
    horizons = sorted(float(T) for T in horizons)
    samples: List[Tuple[float, float]] = []
    overflow = False
    for T in horizons:
        with np.errstate(all="ignore"):
            num = float(dgamma(np.array([T]))[0])
            den = float(gamma(np.array([T]))[0])
            r = num / den if den != 0.0 else math.inf
        if not math.isfinite(r):
            overflow = True
            r = math.inf
        samples.append((T, r))
    values = [r for _, r in samples]
    last = values[-1]
    doubling = all(values[i + 1] >= 2.0 * values[i]
                   for i in range(len(values) - 1))
    if overflow or (doubling and last > growth_cap):
        return RateEstimate(samples, "infinite", math.inf)
    if abs(last) < zero_tol:
        return RateEstimate(samples, "zero", last)
    return RateEstimate(samples, "finite", last)


def conv_exp_ratio(gamma: WeightFunction, alpha: float, t: float,
                   quad_tol: float = DEFAULT_TOL,
                   h: Optional[float] = None) -> float:
    """Ratio of int_0^t e^{-alpha (t-s)} gamma(s) ds to gamma(t)/alpha.

    For a subexponential weight the ratio tends to 1.  The convolution is
    evaluated with the solver's exponential-kernel stepping.
    """
    if alpha <= 0.0 or t <= 0.0:
        raise ValueError("alpha and t must be positive")
    from .solver import solve_linear_values

    if h is None:
        h = min(0.01, t / 100.0)
    n = max(2, int(round(t / h)))
    h = t / n
    vals = solve_linear_values(gamma.func, rate=-alpha, y0=0.0, t0=0.0,
                               h=h, n=n, quad_tol=quad_tol)
    gt = float(gamma(np.array([t]))[0])
    if gt <= 0.0:
        raise NonPositiveWeightError(
            f"weight {gamma.label!r} is non-positive at t={t!r}")
    return float(vals[-1]) / (gt / alpha)
