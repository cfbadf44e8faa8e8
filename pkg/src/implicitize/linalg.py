"""Self-contained dense linear algebra: Householder least squares, Jacobi-CG, GMRES.

State vectors are plain 1-D float64 ndarrays and dense matrices are 2-D
row-major ndarrays; nothing here depends on the rest of the package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

__all__ = [
    "LinearOperator",
    "ConvergenceError",
    "qr_least_squares",
    "cg_solve",
    "gmres_solve",
]

# Columns whose R-diagonal falls below this fraction of the largest one are
# treated as numerically dependent and dropped from the least-squares basis.
DEFAULT_COLUMN_DROP = 1e-10


class ConvergenceError(RuntimeError):
    """An iterative solve failed to reach its tolerance.

    Carries the best iterate seen (``best``) and its residual norm
    (``residual_norm``) so callers can inspect or salvage the result.
    """

    def __init__(self, message, best=None, residual_norm=None, iterations=None):
        super().__init__(message)
        self.best = best
        self.residual_norm = residual_norm
        self.iterations = iterations


@dataclass(frozen=True)
class LinearOperator:
    """Matrix-free linear map on length-``dim`` vectors.

    ``diagonal`` (when known) enables Jacobi preconditioning; ``symmetric``
    is a promise made by the constructor, not a verified property.
    """

    dim: int
    apply: Callable[[np.ndarray], np.ndarray]
    symmetric: bool = False
    diagonal: Optional[np.ndarray] = field(default=None, repr=False)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.apply(x)

    @staticmethod
    def identity(dim: int) -> "LinearOperator":
        return LinearOperator(
            dim=dim,
            apply=lambda x: x.copy(),
            symmetric=True,
            diagonal=np.ones(dim),
        )

    @staticmethod
    def from_matrix(matrix: np.ndarray, symmetric: Optional[bool] = None) -> "LinearOperator":
        """Wrap a dense matrix; symmetry is detected unless stated."""
        m = np.asarray(matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("from_matrix expects a square 2-D array")
        if symmetric is None:
            symmetric = bool(np.allclose(m, m.T, rtol=1e-12, atol=1e-12))
        return LinearOperator(
            dim=m.shape[0],
            apply=lambda x: m @ x,
            symmetric=symmetric,
            diagonal=np.diag(m).copy(),
        )


def _householder_vectors(a: np.ndarray):
    """Factor ``a`` in place into Householder vectors and triangular R."""
    m, n = a.shape
    vs = []
    for j in range(min(m, n)):
        x = a[j:, j]
        norm_x = np.linalg.norm(x)
        if norm_x == 0.0:
            vs.append(None)
            continue
        v = x.copy()
        v[0] += math.copysign(norm_x, x[0]) if x[0] != 0.0 else norm_x
        v /= np.linalg.norm(v)
        a[j:, j:] -= 2.0 * np.outer(v, v @ a[j:, j:])
        vs.append(v)
    return vs, a


def _apply_qt(vs, b: np.ndarray) -> np.ndarray:
    """Apply the transpose of the accumulated reflections to ``b``."""
    y = b.copy()
    for j, v in enumerate(vs):
        if v is None:
            continue
        y[j:] -= 2.0 * v * (v @ y[j:])
    return y


def _back_substitute(r: np.ndarray, y: np.ndarray) -> np.ndarray:
    k = r.shape[1]
    x = np.zeros(k)
    for i in range(k - 1, -1, -1):
        x[i] = (y[i] - r[i, i + 1 :] @ x[i + 1 :]) / r[i, i]
    return x


def qr_least_squares(
    a: np.ndarray,
    b: np.ndarray,
    drop_tol: float = DEFAULT_COLUMN_DROP,
) -> np.ndarray:
    """Minimize ``||a @ coeffs - b||_2`` via Householder QR.

    Numerically dependent columns (R-diagonal below ``drop_tol`` times the
    largest diagonal) are dropped and their coefficients pinned to zero, so
    duplicate directions resolve deterministically instead of through a
    minimal-norm pseudoinverse.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2:
        raise ValueError("expected a 2-D coefficient matrix")
    m, n = a.shape
    if b.shape != (m,):
        raise ValueError(f"rhs length {b.shape} does not match {m} rows")
    if n == 0:
        return np.zeros(0)

    # Columns beyond the row count can never get a pivot; drop them up front.
    keep = list(range(min(m, n)))
    coeffs = np.zeros(n)
    while keep:
        vs, r = _householder_vectors(a[:, keep].copy())
        diag = np.abs(np.diagonal(r))
        max_diag = diag.max()
        if max_diag == 0.0:
            keep = []
            break
        alive = [j for j, d in enumerate(diag) if d >= drop_tol * max_diag]
        if len(alive) == len(keep):
            y = _apply_qt(vs, b)[: len(keep)]
            coeffs[keep] = _back_substitute(r[: len(keep), :], y)
            return coeffs
        keep = [keep[j] for j in alive]
    return coeffs


def cg_solve(
    op: LinearOperator,
    b: np.ndarray,
    precond: Optional[np.ndarray] = None,
    tol: float = 1e-10,
    max_iter: Optional[int] = None,
) -> tuple[np.ndarray, int]:
    """Conjugate gradients for SPD ``op``, optionally Jacobi preconditioned.

    ``precond`` is the diagonal of ``op`` (or None for no preconditioning).
    Stops when ``||b - op(x)|| <= tol * ||b||``; raises ConvergenceError with
    the best iterate attached if ``max_iter`` is exhausted first.
    """
    if not op.symmetric:
        raise ValueError("cg_solve requires a symmetric operator")
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    b = np.asarray(b, dtype=float)
    n = op.dim
    if max_iter is None:
        max_iter = n

    inv_diag = None
    if precond is not None:
        precond = np.asarray(precond, dtype=float)
        if precond.shape != (n,) or np.any(precond <= 0.0):
            raise ValueError("preconditioner must be a positive diagonal of length dim")
        inv_diag = 1.0 / precond

    x = np.zeros(n)
    r = b.copy()
    b_norm = np.linalg.norm(b)
    if b_norm == 0.0:
        return x, 0
    threshold = tol * b_norm

    z = r * inv_diag if inv_diag is not None else r
    p = z.copy()
    rz = r @ z
    best_x, best_res = x.copy(), b_norm
    for k in range(1, max_iter + 1):
        ap = op(p)
        alpha = rz / (p @ ap)
        x = x + alpha * p
        r = r - alpha * ap
        res = np.linalg.norm(r)
        if res < best_res:
            best_x, best_res = x.copy(), res
        if res <= threshold:
            return x, k
        z = r * inv_diag if inv_diag is not None else r
        rz_next = r @ z
        p = z + (rz_next / rz) * p
        rz = rz_next
    raise ConvergenceError(
        f"CG did not reach tol={tol:g} in {max_iter} iterations "
        f"(final relative residual {best_res / b_norm:.3e})",
        best=best_x,
        residual_norm=best_res,
        iterations=max_iter,
    )


def gmres_solve(
    op: LinearOperator,
    b: np.ndarray,
    tol: float = 1e-10,
    max_iter: Optional[int] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Full (unrestarted) GMRES from a zero initial guess.

    Returns the solution and the trace of true residual norms
    ``||b - op(x_k)||`` starting from the k=0 entry ``||b||``. Intended as a
    reference solver, so iterates are formed and residuals measured exactly
    at every step rather than via Givens recurrences.
    """
    b = np.asarray(b, dtype=float)
    n = op.dim
    if max_iter is None:
        max_iter = n

    beta = np.linalg.norm(b)
    trace = [beta]
    if beta == 0.0:
        return np.zeros(n), np.array(trace)
    threshold = tol * beta

    basis = [b / beta]
    h = np.zeros((max_iter + 1, max_iter))
    x = np.zeros(n)
    for k in range(max_iter):
        w = op(basis[k])
        for i in range(k + 1):
            h[i, k] = basis[i] @ w
            w = w - h[i, k] * basis[i]
        h[k + 1, k] = np.linalg.norm(w)

        rhs = np.zeros(k + 2)
        rhs[0] = beta
        y = qr_least_squares(h[: k + 2, : k + 1], rhs)
        x = np.tensordot(y, basis[: k + 1], axes=(0, 0))
        res = np.linalg.norm(b - op(x))
        trace.append(res)
        if res <= threshold or h[k + 1, k] <= 1e-14 * max(1.0, abs(h[: k + 2, k]).max()):
            # Converged, or the Krylov space became invariant (happy
            # breakdown), in which case x is already exact.
            return x, np.array(trace)
        basis.append(w / h[k + 1, k])
    raise ConvergenceError(
        f"GMRES did not reach tol={tol:g} in {max_iter} iterations",
        best=x,
        residual_norm=trace[-1],
        iterations=max_iter,
    )
