"""Anderson mixing of fixed-point iterations.

The accelerated update combines the recent iterates ``u_i`` with weights
that minimize the 2-norm of the matching affine combination of residuals
``r_i = u_i - G(u_i)``. The constrained problem (weights summing to one) is
reduced to an unconstrained least-squares solve on the residual differences
``r_i - r_0`` and handed to :func:`implicitize.linalg.qr_least_squares`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import DEFAULT_COLUMN_DROP, qr_least_squares

__all__ = ["AndersonConfig", "AndersonWindow", "mixing_coefficients", "aa_step"]


@dataclass(frozen=True)
class AndersonConfig:
    """Knobs for the accelerated update.

    depth
        Number of past residual differences retained; 0 disables mixing
        entirely and reproduces the plain iteration bit for bit.
    damping
        Convex blend in ``u_i - damping * r_i``; 1.0 is the undamped update.
    alternation_period
        Mix only on every k-th iteration, with plain map applications in
        between (k=1 mixes whenever possible).
    column_drop_threshold
        Relative cutoff below which near-dependent residual-difference
        columns are discarded in the least-squares solve.
    """

    depth: int = 0
    damping: float = 1.0
    alternation_period: int = 1
    column_drop_threshold: float = DEFAULT_COLUMN_DROP

    def __post_init__(self):
        if self.depth < 0:
            raise ValueError("depth must be non-negative")
        if not 0.0 < self.damping <= 1.0:
            raise ValueError("damping must lie in (0, 1]")
        if self.alternation_period < 1:
            raise ValueError("alternation_period must be a positive integer")
        if self.column_drop_threshold < 0.0:
            raise ValueError("column_drop_threshold must be non-negative")


class AndersonWindow:
    """Moving window of the ``depth + 1`` most recent (iterate, residual) pairs.

    Oldest entries are evicted first. A window belongs to a single solve;
    reuse across unrelated fixed-point problems mixes incompatible residuals.
    """

    def __init__(self, depth: int):
        if depth < 0:
            raise ValueError("depth must be non-negative")
        self.depth = depth
        self.iterates: list[np.ndarray] = []
        self.residuals: list[np.ndarray] = []
        self.updates = 0
        self.last_mixed = False

    def __len__(self) -> int:
        return len(self.iterates)

    @property
    def effective_depth(self) -> int:
        """Current mixing depth: min(iterations so far, configured depth)."""
        return len(self.iterates) - 1

    def push(self, iterate: np.ndarray, residual: np.ndarray) -> None:
        if self.iterates and iterate.shape != self.iterates[-1].shape:
            raise ValueError(
                f"iterate of shape {iterate.shape} pushed into a window of "
                f"shape {self.iterates[-1].shape}"
            )
        self.iterates.append(np.array(iterate, dtype=float))
        self.residuals.append(np.array(residual, dtype=float))
        self.updates += 1
        if len(self.iterates) > self.depth + 1:
            self.iterates.pop(0)
            self.residuals.pop(0)

    def reset(self) -> None:
        self.iterates.clear()
        self.residuals.clear()
        self.updates = 0
        self.last_mixed = False


def mixing_coefficients(
    window: AndersonWindow,
    column_drop_threshold: float = DEFAULT_COLUMN_DROP,
) -> np.ndarray:
    """Weights (oldest first, summing to one) minimizing the combined residual.

    The leading weight is reconstructed as one minus the rest, so the sum
    constraint holds by construction. Identical residuals collapse to the
    plain choice (1, 0, ..., 0) through column dropping.
    """
    if len(window) == 0:
        raise ValueError("mixing_coefficients needs a non-empty window")
    k = window.effective_depth
    if k == 0:
        return np.ones(1)
    r0 = window.residuals[0]
    delta = np.stack([r - r0 for r in window.residuals[1:]], axis=1)
    tail = qr_least_squares(delta, -r0, drop_tol=column_drop_threshold)
    return np.concatenate(([1.0 - tail.sum()], tail))


def aa_step(
    window: AndersonWindow,
    config: AndersonConfig,
    u_k: np.ndarray,
    g_uk: np.ndarray,
) -> np.ndarray:
    """Advance one fixed-point iteration, mixing when the config allows.

    The caller supplies ``g_uk = G(u_k)``; the pair is recorded in the window
    first so the newest residual participates in the mixing solve. Depth 0
    and off-phase alternation iterations return ``g_uk`` unchanged.
    """
    u_k = np.asarray(u_k, dtype=float)
    g_uk = np.asarray(g_uk, dtype=float)
    if u_k.shape != g_uk.shape:
        raise ValueError(f"iterate shape {u_k.shape} does not match map output {g_uk.shape}")
    window.push(u_k, u_k - g_uk)
    window.last_mixed = False
    if (
        config.depth == 0
        or len(window) < 2
        or window.updates % config.alternation_period != 0
    ):
        return g_uk
    alpha = mixing_coefficients(window, config.column_drop_threshold)
    window.last_mixed = True
    beta = config.damping
    mixed = np.zeros_like(u_k)
    for a, u, r in zip(alpha, window.iterates, window.residuals):
        mixed += a * (u - beta * r)
    return mixed
