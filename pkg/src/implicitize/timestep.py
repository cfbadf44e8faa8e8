"""Implicit-Euler time marching with fixed-point (implicitized) step solvers.

Each implicit step ``M (x^n - x^{n-1}) = dt f(t_n, x^n)`` is solved by
iterating the explicit update ``G(x) = x_prev + dt M^{-1} f(t_n, x)``, whose
fixed points are exactly the implicit solutions. The iteration can be
Anderson-accelerated; IMEX and tightly-converged reference variants are
provided for comparison runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .anderson import AndersonConfig
from .fixedpoint import (
    FixedPointConfig,
    FixedPointReport,
    FixedPointStatus,
    solve_fixed_point,
)
from .linalg import ConvergenceError, LinearOperator, cg_solve

__all__ = [
    "ODESystem",
    "TimeGrid",
    "Implicitized",
    "GroundTruth",
    "ImexFHN",
    "ExplicitEuler",
    "SchemeVariant",
    "StepFailureError",
    "SingularStepError",
    "StepRecord",
    "IntegrationResult",
    "step_map",
    "implicitized_step",
    "quasi_newton_step",
    "ground_truth_step",
    "imex_step_fhn",
    "integrate",
]

# Inner mass solves run well below the fixed-point tolerances so their error
# never dominates the outer iteration.
MASS_SOLVE_TOL = 1e-12


class StepFailureError(RuntimeError):
    """A time step's nonlinear solve did not converge; carries the report."""

    def __init__(self, message, report: Optional[FixedPointReport] = None):
        super().__init__(message)
        self.report = report


class SingularStepError(RuntimeError):
    """A closed-form step update hit a (near-)singular linear system."""


@dataclass
class ODESystem:
    """First-order system ``M x' = f(t, x)`` with optional helpers.

    ``mass`` defaults to the identity when absent and must be SPD otherwise.
    ``ground_truth`` (when provided) solves one implicit step to a given
    tolerance and overrides the generic Newton oracle; its signature is
    ``(t_n, x_prev, dt, tol) -> x_n``. ``lipschitz_estimate`` documents a
    bound on the x-Lipschitz constant of ``f`` when one is known.
    """

    dim: int
    rhs: Callable[[float, np.ndarray], np.ndarray]
    mass: Optional[LinearOperator] = None
    lipschitz_estimate: Optional[float] = None
    ground_truth: Optional[Callable[[float, np.ndarray, float, float], np.ndarray]] = None

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("system dimension must be positive")
        if self.mass is not None and self.mass.dim != self.dim:
            raise ValueError("mass operator dimension does not match the system")


@dataclass(frozen=True)
class TimeGrid:
    """Equidistant time points from ``t_start`` to ``t_end`` with step ``dt``."""

    t_start: float
    t_end: float
    dt: float

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")
        span = self.t_end - self.t_start
        if span < 0.0:
            raise ValueError("t_end must not precede t_start")
        steps = span / self.dt
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise ValueError("(t_end - t_start) / dt must round to an integer")

    @property
    def n_steps(self) -> int:
        return int(round((self.t_end - self.t_start) / self.dt))

    def times(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.n_steps + 1)


@dataclass(frozen=True)
class Implicitized:
    """Solve each implicit step by (optionally accelerated) fixed-point iteration."""

    aa: AndersonConfig = field(default_factory=AndersonConfig)
    fp: FixedPointConfig = field(default_factory=FixedPointConfig)


@dataclass(frozen=True)
class GroundTruth:
    """Reference scheme: each implicit step solved to a tight tolerance."""

    tol: float = 1e-10

    def __post_init__(self):
        if self.tol > 1e-9:
            raise ValueError("ground-truth tolerance must be at most 1e-9")


@dataclass(frozen=True)
class ImexFHN:
    """Semi-implicit splitting specific to the two-variable membrane model.

    ``params`` must expose the attributes a, b, R, tau, I_ext.
    """

    params: object


@dataclass(frozen=True)
class ExplicitEuler:
    """One application of the explicit update per step (no sub-iteration)."""


SchemeVariant = Union[Implicitized, GroundTruth, ImexFHN, ExplicitEuler]


class StepMap:
    """Explicit update ``G(x) = x_prev + dt * M^{-1} f(t_n, x)`` for one step.

    Mass solves use Jacobi-preconditioned CG; their iteration counts are
    accumulated in ``cg_iterations`` for reporting.
    """

    def __init__(self, system: ODESystem, t_n: float, x_prev: np.ndarray, dt: float):
        if dt <= 0.0:
            raise ValueError("dt must be positive")
        x_prev = np.asarray(x_prev, dtype=float)
        if x_prev.shape != (system.dim,):
            raise ValueError("previous state dimension does not match the system")
        self.system = system
        self.t_n = t_n
        self.x_prev = x_prev
        self.dt = dt
        self.cg_iterations: list[int] = []

    def mass_solve(self, rhs: np.ndarray) -> np.ndarray:
        mass = self.system.mass
        if mass is None:
            return rhs
        y, iters = cg_solve(mass, rhs, precond=mass.diagonal, tol=MASS_SOLVE_TOL)
        self.cg_iterations.append(iters)
        return y

    def __call__(self, x: np.ndarray) -> np.ndarray:
        fx = np.asarray(self.system.rhs(self.t_n, x), dtype=float)
        return self.x_prev + self.dt * self.mass_solve(fx)


def step_map(system: ODESystem, t_n: float, x_prev: np.ndarray, dt: float) -> StepMap:
    """Build the explicit update map whose fixed points solve the implicit step."""
    return StepMap(system, t_n, x_prev, dt)


def implicitized_step(
    system: ODESystem,
    t_n: float,
    x_prev: np.ndarray,
    dt: float,
    aa: Optional[AndersonConfig] = None,
    fp: Optional[FixedPointConfig] = None,
) -> tuple[np.ndarray, FixedPointReport]:
    """Advance one implicit step by fixed-point iteration started at ``x_prev``.

    Raises StepFailureError (report attached) when the iteration diverges or
    stalls; the window is fresh for every step so residuals of different
    nonlinear problems never mix.
    """
    x, report, _ = _implicitized_step_full(system, t_n, x_prev, dt, aa, fp)
    return x, report


def _implicitized_step_full(system, t_n, x_prev, dt, aa, fp):
    g = step_map(system, t_n, x_prev, dt)
    x, report = solve_fixed_point(g, g.x_prev, fp=fp, aa=aa)
    if not report.converged:
        raise StepFailureError(
            f"implicitized step at t={t_n:g} ended with status "
            f"{report.status.value} after {report.iterations} iterations",
            report=report,
        )
    return x, report, g.cg_iterations


def quasi_newton_step(
    system: ODESystem,
    t_n: float,
    x_prev: np.ndarray,
    dt: float,
    x_current: np.ndarray,
) -> np.ndarray:
    """Increment form of the explicit update: solves ``M dx = -F(x_current)``
    with the implicit-step residual ``F(x) = M (x - x_prev) - dt f(t_n, x)``.

    The mass inverse is applied analytically to the residual's pieces, so
    ``x_current + dx`` reproduces the step map's output to round-off.
    """
    g = step_map(system, t_n, x_prev, dt)
    x_current = np.asarray(x_current, dtype=float)
    fx = np.asarray(system.rhs(t_n, x_current), dtype=float)
    return (g.x_prev - x_current) + dt * g.mass_solve(fx)


def ground_truth_step(
    system: ODESystem,
    t_n: float,
    x_prev: np.ndarray,
    dt: float,
    tol: float = 1e-10,
) -> np.ndarray:
    """Solve the implicit step to ``||F(x)|| <= tol`` on the scaled residual
    ``F(x) = (x - x_prev) - dt M^{-1} f(t_n, x)``.

    Uses the system's own step oracle when it has one; otherwise a damped
    Newton iteration with a central finite-difference Jacobian. Raises
    ConvergenceError when the oracle itself cannot reach the tolerance.
    """
    x_prev = np.asarray(x_prev, dtype=float)
    if system.ground_truth is not None:
        return system.ground_truth(t_n, x_prev, dt, tol)

    g = step_map(system, t_n, x_prev, dt)

    def residual(x):
        return x - g(x)

    x = x_prev.copy()
    f_val = residual(x)
    f_norm = np.linalg.norm(f_val)
    n = system.dim
    for _ in range(50):
        if f_norm <= tol:
            return x
        jac = np.empty((n, n))
        for i in range(n):
            eps = 1e-6 * (1.0 + abs(x[i]))
            x_hi = x.copy()
            x_hi[i] += eps
            x_lo = x.copy()
            x_lo[i] -= eps
            jac[:, i] = (residual(x_hi) - residual(x_lo)) / (2.0 * eps)
        delta = np.linalg.solve(jac, -f_val)
        # Half-step backtracking whenever the residual norm would grow.
        step = 1.0
        for _ in range(30):
            x_try = x + step * delta
            f_try = residual(x_try)
            f_try_norm = np.linalg.norm(f_try)
            if f_try_norm < f_norm or not np.isfinite(f_try_norm):
                break
            step *= 0.5
        else:
            raise ConvergenceError(
                "Newton backtracking stalled in the reference step solver",
                best=x,
                residual_norm=f_norm,
            )
        x, f_val, f_norm = x_try, f_try, f_try_norm
    if f_norm <= tol:
        return x
    raise ConvergenceError(
        f"reference step solver did not reach tol={tol:g} (residual {f_norm:.3e}); "
        "the oracle is unreliable at this dt",
        best=x,
        residual_norm=f_norm,
    )


def imex_step_fhn(params, state_prev: np.ndarray, dt: float) -> np.ndarray:
    """Semi-implicit update for the two-variable membrane model.

    The potential equation is solved for the new v with the cubic factor
    frozen at the previous value and the recovery variable lagged; the
    recovery equation is advanced fully explicitly.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    state_prev = np.asarray(state_prev, dtype=float)
    if state_prev.shape != (2,):
        raise ValueError("imex_step_fhn expects a 2-dimensional state (v, w)")
    v_prev, w_prev = float(state_prev[0]), float(state_prev[1])
    denom = 1.0 / dt - 1.0 + v_prev * v_prev / 3.0
    if abs(denom) < 1e-14:
        raise SingularStepError("potential update has a vanishing denominator")
    v_new = (v_prev / dt - w_prev + params.R * params.I_ext) / denom
    w_new = w_prev + (dt / params.tau) * (v_prev + params.a - params.b * w_prev)
    return np.array([v_new, w_new])


@dataclass
class StepRecord:
    """Per-step diagnostics collected while integrating."""

    t: float
    fixed_point: Optional[FixedPointReport] = None
    cg_iterations: tuple[int, ...] = ()


@dataclass
class IntegrationResult:
    """Trajectory plus per-step records; ``failed_at`` is the index of the
    first step whose solve failed (None when the run completed)."""

    trajectory: np.ndarray
    records: list[StepRecord]
    failed_at: Optional[int] = None

    @property
    def ok(self) -> bool:
        return self.failed_at is None


def integrate(
    system: ODESystem,
    x0: np.ndarray,
    grid: TimeGrid,
    scheme: SchemeVariant,
) -> IntegrationResult:
    """March ``system`` across ``grid`` with the selected scheme.

    The trajectory always starts with ``x0``; on a step failure the partial
    trajectory is returned with ``failed_at`` set and the failing step's
    report kept in the records.
    """
    x = np.asarray(x0, dtype=float)
    if x.shape != (system.dim,):
        raise ValueError("initial state dimension does not match the system")
    states = [x.copy()]
    records: list[StepRecord] = []
    failed_at = None
    for n in range(grid.n_steps):
        t_next = grid.t_start + (n + 1) * grid.dt
        try:
            if isinstance(scheme, Implicitized):
                x, report, cg = _implicitized_step_full(
                    system, t_next, x, grid.dt, scheme.aa, scheme.fp
                )
                records.append(StepRecord(t=t_next, fixed_point=report, cg_iterations=tuple(cg)))
            elif isinstance(scheme, GroundTruth):
                x = ground_truth_step(system, t_next, x, grid.dt, tol=scheme.tol)
                records.append(StepRecord(t=t_next))
            elif isinstance(scheme, ImexFHN):
                x = imex_step_fhn(scheme.params, x, grid.dt)
                records.append(StepRecord(t=t_next))
            elif isinstance(scheme, ExplicitEuler):
                g = step_map(system, t_next, x, grid.dt)
                x = g(x)
                records.append(StepRecord(t=t_next, cg_iterations=tuple(g.cg_iterations)))
            else:
                raise TypeError(f"unknown scheme variant: {scheme!r}")
        except StepFailureError as failure:
            records.append(StepRecord(t=t_next, fixed_point=failure.report))
            failed_at = n
            break
        except (ConvergenceError, SingularStepError):
            records.append(StepRecord(t=t_next))
            failed_at = n
            break
        states.append(x.copy())
    return IntegrationResult(
        trajectory=np.array(states),
        records=records,
        failed_at=failed_at,
    )
