"""Moving-window averages of forcing terms and their decomposition.

The decisive functional throughout the package is the windowed integral

    f_theta(t) = int_{max(t - theta, 0)}^{t} f(s) ds,

with f extended by zero for t < 0.  Field assembly reuses one refined
prefix integral of f instead of quadrature per cell, which keeps the
(theta, t) lattice linear in the number of grid points.  The
decomposition splits f into its window average plus a drift whose
running integral is exactly the window-family average of f.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import cumulative_simpson, simpson

from .expr import FunctionExpr, ScalarFunction, Unary, differentiate
from .expr import _mul as _fold_mul
from .quadrature import (DEFAULT_TOL, adaptive_quad, batch_quad,
                         weighted_step_panels)
from .report import ResidualReport
from .solver import Grid, GridError, Trajectory

#: prefix cache resolution relative to the field grid
PREFIX_REFINE = 8


class PrefixCache:
    """Running integral of f from 0, exact at arbitrary points.

    Values on a refined uniform grid are cumulative panel integrals; an
    off-grid query adds one short correction integral from the nearest
    node below, so every value is quadrature-accurate rather than
    interpolated.  Queries at x <= 0 return 0 (f vanishes for t < 0).
    """

    def __init__(self, fn: Callable, t_end: float, h: float,
                 quad_tol: float = DEFAULT_TOL):
        self.fn = fn
        self.h = h
        self.n = max(1, int(math.ceil(t_end / h - 1e-12)))
        self.quad_tol = quad_tol
        from .quadrature import prefix_on_grid
        self.values = prefix_on_grid(fn, 0.0, h, self.n, tol=quad_tol)

    @property
    def t_end(self) -> float:
        return self.n * self.h

    def at(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        shape = x.shape
        flat = np.clip(x.ravel(), 0.0, None)
        if np.any(flat > self.t_end + 1e-9):
            raise ValueError("prefix query beyond cached range")
        idx = np.clip((flat / self.h + 1e-12).astype(int), 0, self.n)
        base_t = idx * self.h
        out = self.values[idx].copy()
        width = flat - base_t
        off = width > 1e-14
        if np.any(off):
            out[off] += batch_quad(self.fn, base_t[off], flat[off],
                                   tol=self.quad_tol)
        return out.reshape(shape)


@dataclass
class MovingAverageField:
    """Windowed integrals of f on a (theta, t) lattice.

    values[j, i] = f_{theta_grid[j]}(t_i); the theta = 0 row is zero.
    """

    theta_grid: np.ndarray
    grid: Grid
    values: np.ndarray
    quad_tol: float
    label: str = ""

    @property
    def t(self) -> np.ndarray:
        return self.grid.points()

    def row(self, j: int) -> np.ndarray:
        return self.values[j]

    def write_csv(self, path) -> None:
        from .report import format_value
        with open(path, "w") as fh:
            header = ["t"] + [format_value(th) for th in self.theta_grid]
            fh.write(",".join(["t"] + [f"theta={v}" for v in header[1:]]) + "\n")
            for i, ti in enumerate(self.t):
                row = [format_value(ti)] + [format_value(v)
                                            for v in self.values[:, i]]
                fh.write(",".join(row) + "\n")


@dataclass
class Decomposition:
    """Split of f into window average over [t-D, t] and drift:

    drift(t) = f(t) - f_D(t)/D, and I(t) = int_0^t drift(s) ds.
    """

    delta: float
    delta_traj: Trajectory
    I_traj: Trajectory


def moving_average(f: Callable, theta: float, t: float,
                   quad_tol: float = DEFAULT_TOL) -> float:
    """f_theta(t) by adaptive quadrature over [max(t - theta, 0), t]."""
    if theta < 0.0 or t < 0.0:
        raise ValueError("theta and t must be non-negative")
    a = max(t - theta, 0.0)
    if a >= t:
        return 0.0
    return adaptive_quad(f, a, t, tol=quad_tol)


def moving_average_field(f: Callable, theta_grid: Sequence[float],
                         grid: Grid, quad_tol: float = DEFAULT_TOL,
                         refine: int = PREFIX_REFINE,
                         label: str = "") -> MovingAverageField:
    """Assemble f_theta(t) for all grid t and all theta in theta_grid.

    One prefix integral on a grid refined by `refine` is shared by every
    cell: f_theta(t) = P(t) - P(max(t - theta, 0)).
    """
    thetas = np.asarray(sorted(float(v) for v in theta_grid))
    if thetas[0] < 0.0:
        raise ValueError("window lengths must be non-negative")
    prefix = PrefixCache(f, grid.t_end, grid.h / refine, quad_tol)
    t = grid.points()
    p_t = prefix.at(t)
    vals = np.empty((len(thetas), grid.n))
    for j, theta in enumerate(thetas):
        if theta == 0.0:
            vals[j] = 0.0
        else:
            vals[j] = p_t - prefix.at(np.maximum(t - theta, 0.0))
    return MovingAverageField(theta_grid=thetas, grid=grid, values=vals,
                              quad_tol=quad_tol, label=label)


def decompose(f: Callable, delta: float, grid: Grid,
              quad_tol: float = DEFAULT_TOL,
              refine: int = PREFIX_REFINE) -> Decomposition:
    """Window/drift decomposition of f with window length delta.

    The drift is evaluated pointwise through the prefix cache and its
    running integral accumulates per-step quadratures, so the kink the
    truncation puts at t = delta must sit on a grid node (delta is
    required to be a whole number of steps).
    """
    if grid.t_start != 0.0:
        raise GridError("decomposition starts at t = 0")
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    grid.index_of_lag(delta)
    prefix = PrefixCache(f, grid.t_end, grid.h / refine, quad_tol)

    def drift(x):
        x = np.asarray(x, dtype=float)
        window = prefix.at(x) - prefix.at(np.maximum(x - delta, 0.0))
        return np.asarray(f(x), dtype=float) - window / delta

    t = grid.points()
    delta_vals = drift(t)
    steps = weighted_step_panels(drift, 0.0, grid.h, grid.steps,
                                 rate=0.0, tol=quad_tol)
    I_vals = np.empty(grid.n)
    I_vals[0] = 0.0
    np.cumsum(steps, out=I_vals[1:])
    label = getattr(f, "label", "")
    return Decomposition(
        delta=delta,
        delta_traj=Trajectory(grid, delta_vals, label=f"drift[{label}]"),
        I_traj=Trajectory(grid, I_vals, label=f"drift_integral[{label}]"))


def verify_decomposition_identity(dec: Decomposition,
                                  field: MovingAverageField,
                                  tol: float) -> ResidualReport:
    """Check that the drift integral equals the window-family average:

        I(t) = (1/D) int_0^D f_theta(t) dtheta          for t >= D,
        I(t) = f_D(t) - (1/D) int_0^t f_D(s) ds         for t in [0, D].

    The theta integral is composite Simpson over the field rows, the
    [0, D] branch integrates the f_D row over t; both are independent of
    the cumulative-drift route that produced I.
    """
    delta = dec.delta
    thetas = field.theta_grid
    if len(thetas) < 33:
        raise ValueError("theta grid too coarse: need at least 33 nodes")
    if abs(thetas[0]) > 1e-12 or abs(thetas[-1] - delta) > 1e-9:
        raise ValueError("theta grid must span [0, delta]")
    if field.grid != dec.I_traj.grid:
        raise ValueError("field and decomposition grids do not match")
    t = field.t
    I_vals = dec.I_traj.values
    m = field.grid.index_of_lag(delta)

    theta_integral = simpson(field.values, x=thetas, axis=0) / delta
    resid_main = np.abs(I_vals[m:] - theta_integral[m:])

    f_delta_row = field.values[-1]
    running = cumulative_simpson(f_delta_row[:m + 1], dx=field.grid.h,
                                 initial=0.0)
    branch_rhs = f_delta_row[:m + 1] - running / delta
    resid_branch = np.abs(I_vals[:m + 1] - branch_rhs)

    k_main = int(np.argmax(resid_main))
    worst_main = float(resid_main[k_main])
    worst_branch = float(np.max(resid_branch))
    worst = max(worst_main, worst_branch)
    return ResidualReport(
        "window_family_average_identity", worst, tol, bool(worst <= tol),
        at_t=float(t[m + k_main]) if worst_main >= worst_branch
        else float(t[int(np.argmax(resid_branch))]),
        details={"tail_residual": worst_main,
                 "startup_residual": worst_branch,
                 "theta_nodes": int(len(thetas))})


@dataclass
class OscillatoryForcing:
    """A rapidly oscillating forcing built from an increasing phase:

    f(t) = phase'(t) * sin(phase(t)), whose window integrals collapse to
    cos(phase(max(t - theta, 0))) - cos(phase(t)) and stay bounded by 2
    however fast f itself grows.
    """

    forcing: ScalarFunction
    phase: FunctionExpr

    def exact_moving_average(self, theta: float, t) -> np.ndarray:
        t_arr = np.asarray(t, dtype=float)
        lo = np.maximum(t_arr - theta, 0.0)
        return (np.cos(self._phase_at(lo)) - np.cos(self._phase_at(t_arr)))

    def _phase_at(self, x):
        from .expr import evaluate
        return np.asarray(evaluate(self.phase, np.asarray(x, dtype=float)))


def oscillatory_forcing(phase: FunctionExpr,
                        check_range: tuple = (0.0, 100.0),
                        n_check: int = 2048) -> OscillatoryForcing:
    """Build the oscillatory family from a strictly increasing phase.

    Monotonicity is checked by sampling phase' on check_range; a
    non-positive sample is an error.
    """
    dphase = differentiate(phase)
    a, b = check_range
    # probe the open interior: a vanishing slope at an endpoint (t^2 at 0)
    # does not break strict monotonicity
    pts = a + (b - a) * np.arange(1, n_check + 1) / (n_check + 1)
    from .expr import evaluate
    slopes = np.asarray(evaluate(dphase, pts), dtype=float)
    if np.any(~(slopes > 0.0)):
        bad = float(pts[np.nonzero(~(slopes > 0.0))[0][0]])
        raise ValueError(f"phase must be strictly increasing; "
                         f"phase' fails at t={bad!r}")
    root = _fold_mul(dphase.root, Unary("sin", phase.root))
    src = phase.source or str(phase)
    f = ScalarFunction(expr=FunctionExpr(root), label=f"osc[{src}]")
    return OscillatoryForcing(forcing=f, phase=phase)
