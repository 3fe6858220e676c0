"""Scenario descriptions and theorem-level cross checks.

A scenario bundles a forcing, a weight, a grid and a theorem id; the
cross check runs the condition side (window-field checks) and the
simulation side (solver plus windowed verdicts) and reports whether they
agree with the theorem's biconditional.  A disagreement points at a
numerical artifact, a horizon that is too short, or a bug; it is always
reported with its full evidence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .classify import (DEFAULT_POLICY, INCONCLUSIVE, INFINITE,
                       POSITIVE_FINITE, ZERO, LimsupEstimate, ThetaProfile,
                       WindowPolicy, _bounded, _norm_ratio_field,
                       _window_estimate, check_bigO, check_derivative_bounds,
                       check_exact_order, check_exponential_stability,
                       check_le_preservation, check_littleo,
                       check_unstable_dominant, estimate_liapunov,
                       limsup_ratio)
from .expr import ScalarFunction
from .forcing import MovingAverageField, moving_average_field
from .quadrature import DEFAULT_TOL
from .solver import (Grid, SystemSpec, Trajectory, derivative_trajectory,
                     solve_scalar, solve_system, spectral_data)
from .weights import WeightFunction


@dataclass
class Scenario:
    """One configured experiment: a theorem plus its data."""

    id: str
    theorem: str
    forcing: List[ScalarFunction]
    weight: WeightFunction
    grid: Grid
    delta: float
    theta_count: int = 33
    system: Optional[SystemSpec] = None
    alpha: Optional[float] = None
    x0: float = 0.0
    cap_weight: Optional[WeightFunction] = None
    epsilons: Tuple[float, ...] = (0.05, 0.1, 0.2)
    liapunov_slack: float = 0.15
    quad_tol: float = DEFAULT_TOL
    policy: WindowPolicy = DEFAULT_POLICY
    outputs: Tuple[str, ...] = ("report",)

    def scalar_forcing(self) -> ScalarFunction:
        return self.forcing[0]


@dataclass
class ClassificationReport:
    """Per-theorem verdicts on both sides plus their agreement."""

    scenario_id: str
    theorem: str
    clauses: Dict[str, dict]
    consistency: str                   # "agree" | "disagree" | "inconclusive"
    notes: str = ""

    def as_dict(self) -> dict:
        return {"scenario": self.scenario_id, "theorem": self.theorem,
                "clauses": self.clauses, "consistency": self.consistency,
                "notes": self.notes}


@dataclass
class CrossCheckResult:
    report: ClassificationReport
    solution: Optional[Trajectory] = None
    ratio_series: Optional[Tuple[np.ndarray, np.ndarray]] = None
    avg_field: Optional[MovingAverageField] = None
    profile: Optional[ThetaProfile] = None
    window_rows: List[Tuple[float, float]] = field(default_factory=list)


def _consistency(cond: Optional[bool], sim: Optional[bool]) -> str:
    if cond is None or sim is None:
        return INCONCLUSIVE
    return "agree" if cond == sim else "disagree"


def _ratio(traj: Trajectory, gamma: WeightFunction) -> Tuple[np.ndarray, np.ndarray]:
    t = traj.t
    return t, traj.norms(1) / np.asarray(gamma(t), dtype=float)


def _windows_of(est: LimsupEstimate) -> List[Tuple[float, float]]:
    return [(hi, m) for (_, hi, m) in est.ratio_max_per_window]


def _require_stable_matrix(sc: Scenario) -> Optional[str]:
    sd = spectral_data(sc.system.A)
    if sd.spectral_abscissa >= 0.0:
        return (f"theorem needs a stable matrix; spectral abscissa is "
                f"{sd.spectral_abscissa!r}")
    return None


# ---------------------------------------------------------------------------
# per-theorem runners
# ---------------------------------------------------------------------------

def _run_bounded_growth(sc: Scenario) -> CrossCheckResult:
    f = sc.scalar_forcing()
    cond = check_bigO(f, sc.weight, sc.delta, sc.grid, sc.theta_count,
                      sc.policy, sc.quad_tol)
    y = solve_scalar(f, 1.0, 0.0, sc.grid, sc.quad_tol)
    sim = limsup_ratio(y, sc.weight, sc.policy)
    consistency = _consistency(cond.holds, _bounded(sim.verdict))
    report = ClassificationReport(
        sc.id, sc.theorem,
        {"condition_window_field_order": cond.as_dict(),
         "simulation_solution_ratio": sim.as_dict()},
        consistency)
    return CrossCheckResult(report, solution=y, ratio_series=_ratio(y, sc.weight),
                            window_rows=_windows_of(sim))


def _run_vanishing(sc: Scenario) -> CrossCheckResult:
    f = sc.scalar_forcing()
    cond = check_littleo(f, sc.weight, sc.delta, sc.grid, sc.theta_count,
                         sc.policy, sc.quad_tol)
    y = solve_scalar(f, 1.0, 0.0, sc.grid, sc.quad_tol)
    sim = limsup_ratio(y, sc.weight, sc.policy)
    sim_zero = (True if sim.verdict == ZERO
                else False if sim.verdict in (POSITIVE_FINITE, INFINITE)
                else None)
    report = ClassificationReport(
        sc.id, sc.theorem,
        {"condition_window_field_vanishing": cond.as_dict(),
         "simulation_solution_ratio": sim.as_dict()},
        _consistency(cond.holds, sim_zero))
    return CrossCheckResult(report, solution=y,
                            ratio_series=_ratio(y, sc.weight),
                            window_rows=_windows_of(sim))


def _run_exact_order(sc: Scenario) -> CrossCheckResult:
    f = sc.scalar_forcing()
    eo = check_exact_order(f, sc.weight, sc.delta, sc.grid, sc.theta_count,
                           sc.policy, sc.quad_tol)
    y = solve_scalar(f, 1.0, 0.0, sc.grid, sc.quad_tol)
    sim = limsup_ratio(y, sc.weight, sc.policy)
    sim_pf = (True if sim.verdict == POSITIVE_FINITE
              else False if sim.verdict in (ZERO, INFINITE) else None)
    clauses = eo.as_dict()
    clauses["simulation_solution_ratio"] = sim.as_dict()
    notes = ""
    if eo.subadditivity_violations:
        notes = (f"{eo.subadditivity_violations} lag-subadditivity "
                 f"violations beyond noise allowance")
    report = ClassificationReport(
        sc.id, sc.theorem, clauses,
        _consistency(eo.clause_single_lag.holds, sim_pf), notes)
    fld = moving_average_field(f, eo.profile.theta_grid, sc.grid, sc.quad_tol)
    return CrossCheckResult(report, solution=y,
                            ratio_series=_ratio(y, sc.weight),
                            avg_field=fld, profile=eo.profile,
                            window_rows=_windows_of(sim))


def _run_bounded_not_zero(sc: Scenario) -> CrossCheckResult:
    f = sc.scalar_forcing()
    cond = check_bigO(f, sc.weight, sc.delta, sc.grid, sc.theta_count,
                      sc.policy, sc.quad_tol)
    thetas, _, ratios = _norm_ratio_field([f], sc.weight, sc.delta, sc.grid,
                                          sc.theta_count, sc.quad_tol)
    t = sc.grid.points()
    live = any(_window_estimate(t, ratios[j], sc.policy).verdict
               == POSITIVE_FINITE for j in range(1, len(thetas)))
    y = solve_scalar(f, 1.0, 0.0, sc.grid, sc.quad_tol)
    sim = limsup_ratio(y, sc.weight, sc.policy)
    sim_pf = (True if sim.verdict == POSITIVE_FINITE
              else False if sim.verdict in (ZERO, INFINITE) else None)
    cond_holds = None if cond.holds is None else (cond.holds and live)
    report = ClassificationReport(
        sc.id, sc.theorem,
        {"condition_window_field_order": cond.as_dict(),
         "condition_live_lag": {"verdict": "holds" if live else "fails"},
         "simulation_solution_ratio": sim.as_dict()},
        _consistency(cond_holds, sim_pf))
    return CrossCheckResult(report, solution=y,
                            ratio_series=_ratio(y, sc.weight),
                            window_rows=_windows_of(sim))


def _run_multidim_bounded(sc: Scenario) -> CrossCheckResult:
    gate = _require_stable_matrix(sc)
    if gate:
        return CrossCheckResult(ClassificationReport(
            sc.id, sc.theorem, {}, INCONCLUSIVE, notes=gate))
    cond = check_bigO(list(sc.system.F), sc.weight, sc.delta, sc.grid,
                      sc.theta_count, sc.policy, sc.quad_tol)
    x = solve_system(sc.system, sc.grid, sc.quad_tol)
    sim = limsup_ratio(x, sc.weight, sc.policy)
    report = ClassificationReport(
        sc.id, sc.theorem,
        {"condition_window_field_order": cond.as_dict(),
         "simulation_solution_ratio": sim.as_dict(),
         "spectral": spectral_data(sc.system.A).as_dict()},
        _consistency(cond.holds, _bounded(sim.verdict)))
    return CrossCheckResult(report, solution=x,
                            ratio_series=_ratio(x, sc.weight),
                            window_rows=_windows_of(sim))


def _run_derivative_bounds(sc: Scenario) -> CrossCheckResult:
    gate = _require_stable_matrix(sc)
    if gate:
        return CrossCheckResult(ClassificationReport(
            sc.id, sc.theorem, {}, INCONCLUSIVE, notes=gate))
    x = solve_system(sc.system, sc.grid, sc.quad_tol)
    xp = derivative_trajectory(x, sc.system)
    bundle = check_derivative_bounds(x, xp, list(sc.system.F), sc.weight,
                                     None, sc.policy)
    consistency = {"satisfied": "agree", "violated": "disagree"}.get(
        bundle.bounded_biconditional, INCONCLUSIVE)
    report = ClassificationReport(sc.id, sc.theorem, bundle.as_dict(),
                                  consistency)
    return CrossCheckResult(report, solution=x,
                            ratio_series=_ratio(x, sc.weight))


def _run_derivative_exact_order(sc: Scenario) -> CrossCheckResult:
    gate = _require_stable_matrix(sc)
    if gate:
        return CrossCheckResult(ClassificationReport(
            sc.id, sc.theorem, {}, INCONCLUSIVE, notes=gate))
    if sc.cap_weight is None:
        return CrossCheckResult(ClassificationReport(
            sc.id, sc.theorem, {}, INCONCLUSIVE,
            notes="needs a cap weight growing faster than the weight"))
    x = solve_system(sc.system, sc.grid, sc.quad_tol)
    xp = derivative_trajectory(x, sc.system)
    bundle = check_derivative_bounds(x, xp, list(sc.system.F), sc.weight,
                                     sc.cap_weight, sc.policy)
    cond_field = check_bigO(list(sc.system.F), sc.weight, sc.delta, sc.grid,
                            sc.theta_count, sc.policy, sc.quad_tol)
    thetas, _, ratios = _norm_ratio_field(list(sc.system.F), sc.weight,
                                          sc.delta, sc.grid, sc.theta_count,
                                          sc.quad_tol)
    t = sc.grid.points()
    live = any(_window_estimate(t, ratios[j], sc.policy).verdict
               == POSITIVE_FINITE for j in range(1, len(thetas)))
    forcing_cap_pf = bundle.ratios["forcing_vs_cap"].verdict == POSITIVE_FINITE
    cond = (None if cond_field.holds is None
            else cond_field.holds and live and forcing_cap_pf)
    sol_pf = bundle.ratios["solution_vs_weight"].verdict == POSITIVE_FINITE
    der_pf = bundle.ratios["derivative_vs_cap"].verdict == POSITIVE_FINITE
    sim = sol_pf and der_pf
    notes = ""
    if bundle.cap_weight_separates is False:
        notes = "cap weight does not separate from the weight on this horizon"
        consistency = INCONCLUSIVE
    else:
        consistency = _consistency(cond, sim)
    clauses = bundle.as_dict()
    clauses["condition_window_field_order"] = cond_field.as_dict()
    clauses["condition_live_lag"] = {"verdict": "holds" if live else "fails"}
    report = ClassificationReport(sc.id, sc.theorem, clauses, consistency,
                                  notes)
    return CrossCheckResult(report, solution=x,
                            ratio_series=_ratio(x, sc.weight))


def _run_liapunov(sc: Scenario) -> CrossCheckResult:
    sd = spectral_data(sc.system.A)
    alpha = sd.spectral_abscissa
    cond = check_le_preservation(list(sc.system.F), alpha, sc.delta,
                                 sc.epsilons, sc.grid, sc.theta_count,
                                 sc.policy, sc.quad_tol)
    x = solve_system(sc.system, sc.grid, sc.quad_tol)
    le = estimate_liapunov(x, sc.policy)
    sim = (le.defined and le.estimate <= alpha + sc.liapunov_slack) \
        if le.defined else None
    report = ClassificationReport(
        sc.id, sc.theorem,
        {"condition_envelope_constants": cond.as_dict(),
         "simulation_exponent": le.as_dict(),
         "spectral": sd.as_dict(),
         "exponent_slack": {"alpha": alpha, "slack": sc.liapunov_slack}},
        _consistency(cond.holds, sim))
    t = x.t
    pos = t > 0
    series = np.full(len(t), -math.inf)
    series[pos] = np.log(np.maximum(x.norms(1)[pos], 1e-300)) / t[pos]
    return CrossCheckResult(report, solution=x, ratio_series=(t, series))


def _run_unstable_dominant(sc: Scenario) -> CrossCheckResult:
    chk = check_unstable_dominant(sc.system, sc.weight, sc.delta, sc.grid,
                                  sc.theta_count, sc.policy, sc.quad_tol)
    x = solve_system(sc.system, sc.grid, sc.quad_tol) if chk.applicable else None
    report = ClassificationReport(
        sc.id, sc.theorem, {"two_sided": chk.as_dict()},
        chk.consistency, notes=chk.reason)
    return CrossCheckResult(
        report, solution=x,
        ratio_series=_ratio(x, sc.weight) if x is not None else None,
        window_rows=_windows_of(chk.simulation) if chk.simulation else [])


def _run_exponential_stability(sc: Scenario) -> CrossCheckResult:
    if sc.alpha is None or sc.alpha <= 0:
        return CrossCheckResult(ClassificationReport(
            sc.id, sc.theorem, {}, INCONCLUSIVE,
            notes="needs a positive decay rate alpha"))
    st = check_exponential_stability(sc.scalar_forcing(), sc.alpha, sc.grid,
                                     sc.x0, sc.policy, sc.quad_tol)
    y = solve_scalar(sc.scalar_forcing(), sc.alpha, sc.x0, sc.grid,
                     sc.quad_tol)
    report = ClassificationReport(sc.id, sc.theorem,
                                  {"two_sided": st.as_dict()},
                                  st.consistency)
    return CrossCheckResult(report, solution=y,
                            ratio_series=(y.t, np.abs(y.values)))


#: theorem id -> (runner, needs_system, one-line description)
THEOREMS = {
    "bounded-growth": (_run_bounded_growth, False,
                       "window field of order gamma iff solution is"),
    "bounded-solution": (_run_bounded_growth, False,
                         "bounded window integrals iff bounded solution"),
    "vanishing-relative": (_run_vanishing, False,
                           "vanishing window ratios iff solution is o(gamma)"),
    "exact-order": (_run_exact_order, False,
                    "solution attains order gamma exactly"),
    "bounded-not-zero": (_run_bounded_not_zero, False,
                         "bounded but non-vanishing solution"),
    "multidim-bounded-growth": (_run_multidim_bounded, True,
                                "system version of the order bound"),
    "derivative-bounds": (_run_derivative_bounds, True,
                          "forcing order iff solution and derivative order"),
    "derivative-exact-order": (_run_derivative_exact_order, True,
                               "split orders for solution and derivative"),
    "liapunov-preservation": (_run_liapunov, True,
                              "forcing envelopes preserve the top exponent"),
    "unstable-dominant": (_run_unstable_dominant, True,
                          "dominant forcing sets the size of an unstable system"),
    "exponential-stability": (_run_exponential_stability, False,
                              "exponentially decaying remainder iff solution"),
}


def cross_check(scenario: Scenario) -> CrossCheckResult:
    """Run both sides of the scenario's theorem and report agreement."""
    if scenario.theorem not in THEOREMS:
        raise KeyError(f"unknown theorem id {scenario.theorem!r}; known: "
                       f"{sorted(THEOREMS)}")
    runner, needs_system, _ = THEOREMS[scenario.theorem]
    if needs_system and scenario.system is None:
        raise ValueError(f"theorem {scenario.theorem!r} needs a system "
                         f"(matrix A, forcing vector, initial state)")
    return runner(scenario)
