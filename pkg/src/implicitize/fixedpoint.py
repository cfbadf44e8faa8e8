"""Driver iterating u <- G(u) to tolerance, with optional Anderson mixing."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .anderson import AndersonConfig, AndersonWindow, aa_step

__all__ = [
    "FixedPointStatus",
    "FixedPointConfig",
    "FixedPointReport",
    "solve_fixed_point",
]


class FixedPointStatus(enum.Enum):
    CONVERGED = "converged"
    MAX_ITER_EXCEEDED = "max_iter_exceeded"
    DIVERGED = "diverged"
    NON_FINITE = "non_finite"


@dataclass(frozen=True)
class FixedPointConfig:
    """Stopping rule: residual ||u - G(u)||_2 against the initial residual.

    Convergence requires the residual to drop below
    ``max(rel_tol * initial_residual, abs_tol)``; divergence is declared once
    it exceeds ``divergence_factor`` times the initial residual.
    """

    rel_tol: float = 1e-8
    abs_tol: float = 1e-12
    max_iter: int = 500
    divergence_factor: float = 1e8

    def __post_init__(self):
        if self.rel_tol <= 0.0 or self.abs_tol <= 0.0:
            raise ValueError("tolerances must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.divergence_factor <= 1.0:
            raise ValueError("divergence_factor must exceed 1")


@dataclass
class FixedPointReport:
    """Outcome of one fixed-point solve.

    ``iterations`` counts map evaluations with a measured residual, and
    ``residual_trace`` holds exactly one entry per such evaluation.
    ``accelerated_steps`` counts the iterations on which mixing was applied.
    """

    status: FixedPointStatus
    iterations: int
    residual_trace: np.ndarray
    accelerated_steps: int = 0

    @property
    def converged(self) -> bool:
        return self.status is FixedPointStatus.CONVERGED


def solve_fixed_point(
    g: Callable[[np.ndarray], np.ndarray],
    u0: np.ndarray,
    fp: Optional[FixedPointConfig] = None,
    aa: Optional[AndersonConfig] = None,
) -> tuple[np.ndarray, FixedPointReport]:
    """Iterate ``u <- G(u)`` from ``u0`` until the residual tolerance is met.

    Returns the final iterate and a report. Non-finite map output ends the
    solve with the last finite iterate; residual growth past the divergence
    factor ends it with the offending iterate attached. Identical inputs
    always produce identical reports.
    """
    fp = fp or FixedPointConfig()
    aa = aa or AndersonConfig()
    u = np.asarray(u0, dtype=float)
    if u.ndim != 1:
        raise ValueError("initial iterate must be a 1-D vector")
    if not np.all(np.isfinite(u)):
        raise ValueError("initial iterate contains non-finite entries")

    window = AndersonWindow(aa.depth)
    trace: list[float] = []
    accelerated = 0
    status = FixedPointStatus.MAX_ITER_EXCEEDED
    threshold = initial = None
    for _ in range(fp.max_iter):
        g_u = np.asarray(g(u), dtype=float)
        if g_u.shape != u.shape:
            raise ValueError("map changed the iterate dimension")
        if not np.all(np.isfinite(g_u)):
            status = FixedPointStatus.NON_FINITE
            break
        res = float(np.linalg.norm(u - g_u))
        trace.append(res)
        if initial is None:
            initial = res
            threshold = max(fp.rel_tol * initial, fp.abs_tol)
        if res <= threshold:
            status = FixedPointStatus.CONVERGED
            break
        if res > fp.divergence_factor * initial:
            status = FixedPointStatus.DIVERGED
            break
        u_next = aa_step(window, aa, u, g_u)
        if window.last_mixed:
            accelerated += 1
        if not np.all(np.isfinite(u_next)):
            status = FixedPointStatus.NON_FINITE
            break
        u = u_next

    report = FixedPointReport(
        status=status,
        iterations=len(trace),
        residual_trace=np.array(trace),
        accelerated_steps=accelerated,
    )
    return u, report
