"""Exact-stepping solvers for forced linear ODEs.

The scalar equation y' = -alpha*y + f and the system x' = A x + F are
stepped with the exact integrating factor per grid step,

    y(t_{k+1}) = e^{-alpha h} y(t_k) + int_0^h e^{-alpha (h-u)} f(t_k+u) du,

so there is no truncation error: trajectories are exact up to the panel
quadrature tolerance.  That matters because the identity verifiers below
hinge on residuals of exact representations staying at quadrature scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from .expr import ScalarFunction
from .quadrature import (DEFAULT_TOL, REL_EPS, _GL_W, _GL_X,
                         QuadratureError, prefix_on_grid,
                         weighted_step_panels)
from .report import ResidualReport

MAX_DIMENSION = 50

# Pade-13 numerator coefficients for the matrix exponential kernel
_PADE13 = (64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
           1187353796428800.0, 129060195264000.0, 10559470521600.0,
           670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
           960960.0, 16380.0, 182.0, 1.0)
_PADE13_THETA = 5.371920351148152


class GridError(ValueError):
    """Grid misuse: invalid spacing, or an identity check asked for a lag
    that is not a whole number of steps."""


@dataclass(frozen=True)
class Grid:
    """Uniform time grid: n points t_start + k*h, k = 0..n-1."""

    t_start: float
    h: float
    n: int

    def __post_init__(self):
        if self.h <= 0.0:
            raise GridError("step must be positive")
        if self.n < 2:
            raise GridError("grid needs at least two points")
        if self.t_start < 0.0:
            raise GridError("t_start must be non-negative")

    @classmethod
    def from_range(cls, t_start: float, t_end: float, h: float) -> "Grid":
        if t_end <= t_start:
            raise GridError("t_end must exceed t_start")
        steps = max(1, int(round((t_end - t_start) / h)))
        return cls(t_start, (t_end - t_start) / steps, steps + 1)

    @property
    def steps(self) -> int:
        return self.n - 1

    @property
    def t_end(self) -> float:
        return self.t_start + self.h * (self.n - 1)

    def points(self) -> np.ndarray:
        return self.t_start + self.h * np.arange(self.n)

    def index_of_lag(self, lag: float, tol: float = 1e-9) -> int:
        """Number of steps spanning `lag`; error if not commensurate."""
        m = int(round(lag / self.h))
        if m < 0 or abs(m * self.h - lag) > tol * max(1.0, abs(lag)):
            raise GridError(f"lag {lag!r} is not a whole number of steps "
                            f"of h={self.h!r}")
        return m


@dataclass
class Trajectory:
    """Grid plus scalar or d-vector values."""

    grid: Grid
    values: np.ndarray
    label: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape[0] != self.grid.n:
            raise ValueError("values length does not match grid")
        if not np.all(np.isfinite(self.values)):
            k = int(np.nonzero(~np.isfinite(self.values))[0][0]) \
                if self.values.ndim == 1 else \
                int(np.nonzero(~np.all(np.isfinite(self.values), axis=1))[0][0])
            raise ValueError(f"non-finite trajectory value near "
                             f"t={self.grid.t_start + k * self.grid.h!r}")

    @property
    def t(self) -> np.ndarray:
        return self.grid.points()

    def norms(self, ord: int = 1) -> np.ndarray:
        """Pointwise vector norm (1-norm default); abs for scalar values."""
        if self.values.ndim == 1:
            return np.abs(self.values)
        if ord == 1:
            return np.sum(np.abs(self.values), axis=1)
        if ord == 2:
            return np.sqrt(np.sum(self.values ** 2, axis=1))
        raise ValueError("supported vector norms: 1, 2")


@dataclass
class SystemSpec:
    """x' = A x + F(t), x(0) = zeta."""

    A: np.ndarray
    F: Sequence[ScalarFunction]
    zeta: np.ndarray

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.zeta = np.atleast_1d(np.asarray(self.zeta, dtype=float))
        d = self.A.shape[0]
        if self.A.shape != (d, d):
            raise ValueError("A must be square")
        if d < 1 or d > MAX_DIMENSION:
            raise ValueError(f"dimension must be in [1, {MAX_DIMENSION}]")
        if len(self.F) != d or self.zeta.shape != (d,):
            raise ValueError("F and zeta must match the dimension of A")
        if not (np.all(np.isfinite(self.A)) and np.all(np.isfinite(self.zeta))):
            raise ValueError("A and zeta must be finite")

    @property
    def dimension(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True)
class SpectralData:
    eigenvalues: List[complex]
    spectral_abscissa: float
    max_dominant_multiplicity: int

    def as_dict(self) -> dict:
        return {
            "eigenvalues": [[ev.real, ev.imag] for ev in self.eigenvalues],
            "spectral_abscissa": self.spectral_abscissa,
            "max_dominant_multiplicity": self.max_dominant_multiplicity,
        }


# --------------------------------------------------------------------------
# matrix exponential and spectra
# --------------------------------------------------------------------------

def matrix_exponential(A: np.ndarray, t: float = 1.0) -> np.ndarray:
    """e^{A t} by scaling and squaring with the Pade-13 kernel."""
    M = np.atleast_2d(np.asarray(A, dtype=float)) * t
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix entries must be finite")
    d = M.shape[0]
    ident = np.eye(d)
    norm = float(np.max(np.sum(np.abs(M), axis=0))) if d else 0.0
    s = max(0, int(math.ceil(math.log2(norm / _PADE13_THETA)))) if norm > _PADE13_THETA else 0
    Ms = M / (2.0 ** s)
    b = _PADE13
    M2 = Ms @ Ms
    M4 = M2 @ M2
    M6 = M2 @ M4
    U = Ms @ (M6 @ (b[13] * M6 + b[11] * M4 + b[9] * M2)
              + b[7] * M6 + b[5] * M4 + b[3] * M2 + b[1] * ident)
    V = (M6 @ (b[12] * M6 + b[10] * M4 + b[8] * M2)
         + b[6] * M6 + b[4] * M4 + b[2] * M2 + b[0] * ident)
    R = np.linalg.solve(V - U, V + U)
    for _ in range(s):
        R = R @ R
    if not np.all(np.isfinite(R)):
        raise OverflowError(
            "matrix exponential overflowed; rescale t or split the interval")
    return R


def spectral_data(A: np.ndarray, cluster_tol: float = 1e-6) -> SpectralData:
    """Eigenvalues, spectral abscissa, and the largest algebraic
    multiplicity among eigenvalues attaining the abscissa.

    Multiplicities come from clustering the computed eigenvalues within
    cluster_tol; the raw eigenvalues are kept alongside because
    multiplicity is discontinuous.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[0] > MAX_DIMENSION:
        raise ValueError(f"dimension cap is {MAX_DIMENSION}")
    eigs = np.linalg.eigvals(A)
    order = np.lexsort((eigs.imag, eigs.real))
    eigs = eigs[order]
    # greedy clustering of nearby eigenvalues
    clusters: List[List[complex]] = []
    for ev in eigs:
        for cluster in clusters:
            if abs(ev - cluster[0]) <= cluster_tol:
                cluster.append(ev)
                break
        else:
            clusters.append([ev])
    abscissa = float(np.max(eigs.real))
    dominant = [len(c) for c in clusters
                if max(e.real for e in c) >= abscissa - cluster_tol]
    return SpectralData(eigenvalues=[complex(e) for e in eigs],
                        spectral_abscissa=abscissa,
                        max_dominant_multiplicity=max(dominant))


def operator_norm(M: np.ndarray, kind: str = "spectral") -> float:
    """Matrix norm: largest singular value, or max column sum ("one")."""
    if kind == "spectral":
        return float(np.linalg.norm(M, 2))
    if kind == "one":
        return float(np.max(np.sum(np.abs(M), axis=0)))
    raise ValueError("norm kind must be 'spectral' or 'one'")


# --------------------------------------------------------------------------
# scalar solves
# --------------------------------------------------------------------------

def solve_linear_values(f: Callable, rate: float, y0: float, t0: float,
                        h: float, n: int,
                        quad_tol: float = DEFAULT_TOL) -> np.ndarray:
    """Values of y' = rate*y + f on t0 + k*h, k = 0..n (length n+1)."""
    q = weighted_step_panels(f, t0, h, n, rate=rate, tol=quad_tol)
    grow = math.exp(rate * h)
    out = np.empty(n + 1)
    out[0] = y0
    acc = y0
    for k in range(n):
        acc = grow * acc + q[k]
        out[k + 1] = acc
    return out


def solve_scalar(f: ScalarFunction, alpha: float, y0: float, grid: Grid,
                 quad_tol: float = DEFAULT_TOL) -> Trajectory:
    """Solve y' = -alpha*y + f(t), y(t_start) = y0, on the grid."""
    vals = solve_linear_values(f, -alpha, y0, grid.t_start, grid.h,
                               grid.steps, quad_tol)
    return Trajectory(grid, vals, label=f"y[{f.label}]",
                      meta={"alpha": alpha, "y0": y0, "quad_tol": quad_tol})


def solve_scalar_general_rate(g: ScalarFunction, alpha: float, grid: Grid,
                              quad_tol: float = DEFAULT_TOL,
                              y0: float = 0.0) -> Trajectory:
    """Solve u' = +alpha*u + g(t) (growth rate alpha), u(t_start) = y0."""
    vals = solve_linear_values(g, alpha, y0, grid.t_start, grid.h,
                               grid.steps, quad_tol)
    return Trajectory(grid, vals, label=f"u[{g.label}]",
                      meta={"rate": alpha, "y0": y0, "quad_tol": quad_tol})


# --------------------------------------------------------------------------
# identity verifiers (scalar, alpha = 1)
# --------------------------------------------------------------------------

def _step_families(f: Callable, grid: Grid, quad_tol: float):
    """Plain and e^{-(h-u)}-weighted step integrals of f over the grid."""
    p = weighted_step_panels(f, grid.t_start, grid.h, grid.steps,
                             rate=0.0, tol=quad_tol)
    q = weighted_step_panels(f, grid.t_start, grid.h, grid.steps,
                             rate=-1.0, tol=quad_tol)
    return p, q


def verify_ave_identity(f: ScalarFunction, y: Trajectory, theta: float,
                        tol: float,
                        quad_tol: float = DEFAULT_TOL) -> ResidualReport:
    """Check the windowed-average identity linking f and y:

        int_{t-theta}^t f = y(t) - y(t-theta) + int_{t-theta}^t y(s) ds

    for all grid t >= theta.  The left side is an independent quadrature
    of f on a refined grid; the right side reconstructs the running
    integral of y from the supplied trajectory with exact per-step
    kernels.  theta must be a whole number of grid steps (identity checks
    never interpolate silently).
    """
    grid = y.grid
    if y.meta.get("alpha", 1.0) != 1.0:
        raise ValueError("identity requires a trajectory solved with alpha=1")
    m = grid.index_of_lag(theta)
    if m == 0:
        return ResidualReport("windowed_average_identity", 0.0, tol, True,
                              details={"theta": theta, "note": "empty window"})
    p, q = _step_families(f, grid, quad_tol)
    d = math.exp(-grid.h)
    yv = y.values
    # running integral of y, reconstructed exactly from the trajectory
    Y = np.empty(grid.n)
    Y[0] = 0.0
    np.cumsum(yv[:-1] * (1.0 - d) + (p - q), out=Y[1:])
    # independent prefix of f at doubled resolution
    P_ref = prefix_on_grid(f, grid.t_start, grid.h / 2.0,
                           2 * grid.steps, tol=quad_tol)[::2]
    lhs = P_ref[m:] - P_ref[:-m]
    rhs = yv[m:] - yv[:-m] + Y[m:] - Y[:-m]
    resid = np.abs(lhs - rhs)
    k = int(np.argmax(resid))
    return ResidualReport("windowed_average_identity", float(resid[k]), tol,
                          bool(resid[k] <= tol),
                          at_t=float(grid.points()[m + k]),
                          details={"theta": theta})


def verify_representation(f: ScalarFunction, delta: float, grid: Grid,
                          tol: float,
                          quad_tol: float = DEFAULT_TOL) -> ResidualReport:
    """Check the representation of y through the window-average family:

        y = (1/D) conv(e, f_D) + I - conv(e, I)

    with conv(e, g)(t) = int_0^t e^{-(t-s)} g(s) ds, f_D the D-window
    average integral and I the drift of the decomposition.  All pieces are
    built by exact per-step recursions so only quadrature error remains;
    y itself comes from the scalar solver and I from the decomposition
    (cumulative quadrature route).
    """
    from .forcing import decompose

    if grid.t_start != 0.0:
        raise GridError("representation identity requires t_start = 0")
    m = grid.index_of_lag(delta)
    if m == 0:
        raise GridError("delta must be at least one grid step")
    h, n = grid.h, grid.steps
    d = math.exp(-h)
    p, q = _step_families(f, grid, quad_tol)
    mq = weighted_step_panels(lambda s: s * np.asarray(f(s)), 0.0, h, n,
                              rate=0.0, tol=quad_tol)
    t = grid.points()
    P = np.empty(n + 1)
    P[0] = 0.0
    np.cumsum(p, out=P[1:])
    dQ = t[1:] * P[1:] - t[:-1] * P[:-1] - mq      # per-step integral of P
    Q = np.empty(n + 1)
    Q[0] = 0.0
    np.cumsum(dQ, out=Q[1:])
    # step convolution integrals of P and Q against e^{-(h-u)}
    E = P[:-1] * (1.0 - d) + p - q
    F = Q[:-1] * (1.0 - d) + dQ - E
    E_lag = np.concatenate((np.zeros(min(m, n)), E[:max(n - m, 0)]))
    F_lag = np.concatenate((np.zeros(min(m, n)), F[:max(n - m, 0)]))

    y = solve_scalar(f, 1.0, 0.0, grid, quad_tol)
    dec = decompose(f, delta, grid, quad_tol)

    v = np.empty(n + 1)                            # conv(e, f_D)
    w = np.empty(n + 1)                            # conv(e, I)
    v[0] = w[0] = 0.0
    av = aw = 0.0
    drive_v = E - E_lag
    drive_w = E - (F - F_lag) / delta
    for k in range(n):
        av = d * av + drive_v[k]
        aw = d * aw + drive_w[k]
        v[k + 1] = av
        w[k + 1] = aw
    rhs = v / delta + dec.I_traj.values - w
    resid = np.abs(y.values - rhs)
    k = int(np.argmax(resid))
    return ResidualReport("window_family_representation", float(resid[k]),
                          tol, bool(resid[k] <= tol), at_t=float(t[k]),
                          details={"delta": delta})


# --------------------------------------------------------------------------
# system solves
# --------------------------------------------------------------------------

def _system_step_panels(spec: SystemSpec, grid: Grid, quad_tol: float):
    """Per-step integrals int_0^h Phi(h-u) F(t_k+u) du, shape (steps, d)."""
    h, n = grid.h, grid.steps
    starts = grid.t_start + h * np.arange(n)
    u = 0.5 * h * (_GL_X + 1.0)
    kernels = np.stack([matrix_exponential(spec.A, h - ui) * (0.5 * h * wi)
                        for ui, wi in zip(u, _GL_W)])
    uh = 0.5 * u
    kernels_h = np.stack([matrix_exponential(spec.A, 0.5 * h - ui) * (0.25 * h * wi)
                          for ui, wi in zip(uh, _GL_W)])
    grow_h = matrix_exponential(spec.A, 0.5 * h)

    def eval_components(pts: np.ndarray) -> np.ndarray:
        return np.stack([np.asarray(Fi(pts), dtype=float)
                         for Fi in spec.F], axis=-1)

    vals = eval_components(starts[:, None] + u[None, :])          # (n,15,d)
    whole = np.einsum("jab,kjb->ka", kernels, vals)
    v1 = eval_components(starts[:, None] + uh[None, :])
    v2 = eval_components(starts[:, None] + (0.5 * h + uh)[None, :])
    halves = (np.einsum("jab,kjb->ka", kernels_h, v1) @ grow_h.T
              + np.einsum("jab,kjb->ka", kernels_h, v2))
    err = np.max(np.abs(halves - whole), axis=1)
    kscale = max(float(operator_norm(grow_h, "one")), 1.0) ** 2
    mass = h * kscale * np.maximum(np.max(np.abs(v1), axis=(1, 2)),
                                   np.max(np.abs(v2), axis=(1, 2)))
    bad = ~((err <= quad_tol) | (err <= REL_EPS * mass))
    if np.any(bad):
        for k in np.nonzero(bad)[0]:
            halves[k] = _system_adapt(spec, float(starts[k]), h,
                                      whole[k], quad_tol, 40)
    return halves


def _system_panel_once(spec: SystemSpec, start: float, w: float):
    u = 0.5 * w * (_GL_X + 1.0)
    acc = np.zeros(spec.dimension)
    pts = start + u
    vals = np.stack([np.asarray(Fi(pts), dtype=float) for Fi in spec.F],
                    axis=-1)
    for j, (ui, wi) in enumerate(zip(u, _GL_W)):
        acc += (matrix_exponential(spec.A, w - ui) * (0.5 * w * wi)) @ vals[j]
    kscale = max(operator_norm(matrix_exponential(spec.A, w), "one"), 1.0)
    return acc, w * kscale * float(np.max(np.abs(vals)))


def _system_adapt(spec, start, h, whole, tol, depth):
    grow = matrix_exponential(spec.A, 0.5 * h)
    left, mass_l = _system_panel_once(spec, start, 0.5 * h)
    right, mass_r = _system_panel_once(spec, start + 0.5 * h, 0.5 * h)
    better = grow @ left + right
    err = np.max(np.abs(better - whole))
    if err <= tol or err <= REL_EPS * (mass_l + mass_r):
        return better
    if depth <= 0:
        raise QuadratureError("subdivision budget exhausted",
                              (start, start + h))
    lv = _system_adapt(spec, start, 0.5 * h, left, 0.5 * tol, depth - 1)
    rv = _system_adapt(spec, start + 0.5 * h, 0.5 * h, right,
                       0.5 * tol, depth - 1)
    return grow @ lv + rv


def solve_system(spec: SystemSpec, grid: Grid,
                 quad_tol: float = DEFAULT_TOL) -> Trajectory:
    """Solve x' = A x + F(t), x(t_start) = zeta, exactly per step."""
    panels = _system_step_panels(spec, grid, quad_tol)
    phi_h = matrix_exponential(spec.A, grid.h)
    out = np.empty((grid.n, spec.dimension))
    out[0] = spec.zeta
    acc = spec.zeta.astype(float).copy()
    for k in range(grid.steps):
        acc = phi_h @ acc + panels[k]
        out[k + 1] = acc
    return Trajectory(grid, out, label="x",
                      meta={"system": True, "quad_tol": quad_tol})


def derivative_trajectory(x: Trajectory, spec: SystemSpec) -> Trajectory:
    """Pointwise x'(t_k) = A x(t_k) + F(t_k)."""
    pts = x.t
    F_vals = np.stack([np.asarray(Fi(pts), dtype=float) for Fi in spec.F],
                      axis=-1)
    vals = x.values @ spec.A.T + F_vals
    return Trajectory(x.grid, vals, label="dx/dt", meta={"system": True})


def _componentwise_unit_solves(spec: SystemSpec, grid: Grid,
                               quad_tol: float) -> np.ndarray:
    """Solve y_i' = -y_i + F_i, y_i(0) = 0 for each component."""
    cols = [solve_linear_values(Fi, -1.0, 0.0, grid.t_start, grid.h,
                                grid.steps, quad_tol) for Fi in spec.F]
    return np.stack(cols, axis=-1)


def verify_cross_representations(spec: SystemSpec, grid: Grid, tol: float,
                                 quad_tol: float = DEFAULT_TOL) -> ResidualReport:
    """Check the two representations binding x and the unit-rate vector y:

        x = y + Phi(.) zeta + conv(Phi, (I+A) y)
        y = x - e^{-.} zeta - conv(e, (I+A) x)

    The convolutions are produced by exact augmented-system solves, so
    both residuals stay at quadrature scale when the solvers agree.
    """
    if grid.t_start != 0.0:
        raise GridError("cross representations require t_start = 0")
    dim = spec.dimension
    zero = ScalarFunction.from_callable(
        lambda s: np.zeros_like(np.asarray(s, dtype=float)), label="0")
    ident = np.eye(dim)

    x = solve_system(spec, grid, quad_tol)
    y = _componentwise_unit_solves(spec, grid, quad_tol)

    # augmented (y, w): w' = A w + (I+A) y
    B1 = np.block([[-ident, np.zeros((dim, dim))], [ident + spec.A, spec.A]])
    aug1 = SystemSpec(B1, list(spec.F) + [zero] * dim, np.zeros(2 * dim))
    w = solve_system(aug1, grid, quad_tol).values[:, dim:]

    # augmented (x, v): v' = -v + (I+A) x
    B2 = np.block([[spec.A, np.zeros((dim, dim))], [ident + spec.A, -ident]])
    aug2 = SystemSpec(B2, list(spec.F) + [zero] * dim,
                      np.concatenate((spec.zeta, np.zeros(dim))))
    v = solve_system(aug2, grid, quad_tol).values[:, dim:]

    # Phi(t) zeta and e^{-t} zeta on the grid
    phi_h = matrix_exponential(spec.A, grid.h)
    phi_zeta = np.empty((grid.n, dim))
    phi_zeta[0] = spec.zeta
    for k in range(grid.steps):
        phi_zeta[k + 1] = phi_h @ phi_zeta[k]
    exp_zeta = np.exp(-grid.points())[:, None] * spec.zeta[None, :]

    r1 = np.max(np.abs(x.values - (y + phi_zeta + w)), axis=1)
    r2 = np.max(np.abs(y - (x.values - exp_zeta - v)), axis=1)
    k1, k2 = int(np.argmax(r1)), int(np.argmax(r2))
    worst = max(float(r1[k1]), float(r2[k2]))
    return ResidualReport(
        "cross_representations", worst, tol, bool(worst <= tol),
        at_t=float(grid.points()[k1 if r1[k1] >= r2[k2] else k2]),
        details={"solution_side_residual": float(r1[k1]),
                 "unit_rate_side_residual": float(r2[k2])})


def resolvent_integral(A: np.ndarray, gamma, grid: Grid,
                       norm: str = "spectral",
                       refine: int = 8) -> Trajectory:
    """M(t) = int_0^t ||Phi(t-s)|| gamma(s)/gamma(t) ds on the grid.

    Boundedness of M across growing t is the Perron-style boundedness
    certificate for the weighted system.  `norm` selects the operator
    norm ("spectral" or "one"); the choice is recorded in the result.
    The integral runs on a grid refined by `refine` with composite
    Simpson, after substituting u = t - s so the flow norm is shared
    across output times.
    """
    from scipy.integrate import simpson

    A = np.atleast_2d(np.asarray(A, dtype=float))
    if grid.t_start != 0.0:
        raise GridError("resolvent integral starts at t = 0")
    n_fine = grid.steps * refine
    h = grid.h / refine
    u = h * np.arange(n_fine + 1)
    phi_h = matrix_exponential(A, h)
    norms = np.empty(n_fine + 1)
    acc = np.eye(A.shape[0])
    norms[0] = operator_norm(acc, norm)
    for k in range(n_fine):
        acc = phi_h @ acc
        norms[k + 1] = operator_norm(acc, norm)
    gamma_vals = np.asarray(gamma(u), dtype=float)
    if np.any(~(gamma_vals > 0.0)):
        bad = float(u[np.nonzero(~(gamma_vals > 0.0))[0][0]])
        raise ValueError(f"weight must be positive on the range; fails "
                         f"at t={bad!r}")
    out = np.empty(grid.n)
    out[0] = 0.0
    for i in range(1, grid.n):
        j = i * refine
        integrand = norms[:j + 1] * gamma_vals[j::-1]
        out[i] = simpson(integrand, dx=h) / gamma_vals[j]
    return Trajectory(grid, out, label="resolvent_bound",
                      meta={"norm": norm})
