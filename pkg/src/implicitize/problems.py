"""Benchmark systems: membrane-potential ODE, structured-grid diffusion models.

PDE problems live on tensor-product grids with homogeneous Dirichlet
boundaries; boundary nodes are eliminated, so the state vector holds interior
values only and all operators are matrix-free stencil applications.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .linalg import ConvergenceError, LinearOperator, cg_solve
from .timestep import ODESystem, SingularStepError

__all__ = [
    "FHNParams",
    "GridSpec",
    "HeatProblem",
    "PLaplacianParams",
    "BurgersParams",
    "MASS_MODES",
    "fhn_system",
    "fhn_picard_matrix_step",
    "heat_system",
    "cfl_threshold",
    "plaplacian_system",
    "burgers_system",
    "default_initial_field",
    "initial_state",
]

MASS_MODES = ("identity_fd", "lumped_fe", "consistent_fe")


# ---------------------------------------------------------------------------
# Membrane-potential ODE


@dataclass(frozen=True)
class FHNParams:
    """Two-variable excitable-membrane model parameters."""

    a: float = 0.7
    b: float = 0.8
    R: float = 1.0
    tau: float = 5.0
    I_ext: float = 0.5

    def __post_init__(self):
        if self.tau <= 0.0:
            raise ValueError("tau must be positive")


def fhn_rhs(params: FHNParams, state: np.ndarray) -> np.ndarray:
    v, w = state[0], state[1]
    return np.array(
        [
            v - v**3 / 3.0 - w + params.R * params.I_ext,
            (v + params.a - params.b * w) / params.tau,
        ]
    )


def fhn_picard_matrix_step(
    params: FHNParams,
    state_prev: np.ndarray,
    state_k: np.ndarray,
    dt: float,
) -> np.ndarray:
    """One lagged-cubic linearization step for the implicit membrane update.

    Solves the 2x2 system that treats everything implicitly except the cubic
    factor, which is frozen at the current iterate; iterating this map to
    convergence yields the fully implicit step.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    v_prev, w_prev = float(state_prev[0]), float(state_prev[1])
    v_k = float(state_k[0])
    a11 = 1.0 / dt - 1.0 + v_k * v_k / 3.0
    a12 = 1.0
    a21 = -1.0
    a22 = params.tau / dt + params.b
    det = a11 * a22 - a12 * a21
    if abs(det) < 1e-14:
        raise SingularStepError("lagged-cubic 2x2 system is singular")
    r1 = v_prev / dt + params.R * params.I_ext
    r2 = params.a + params.tau * w_prev / dt
    return np.array([(r1 * a22 - a12 * r2) / det, (a11 * r2 - a21 * r1) / det])


def fhn_system(params: Optional[FHNParams] = None) -> ODESystem:
    """Build the membrane model as an ODESystem with its own step oracle."""
    params = params or FHNParams()

    def rhs(t, state):
        return fhn_rhs(params, state)

    def step_oracle(t_n, x_prev, dt, tol):
        x = np.asarray(x_prev, dtype=float)
        for _ in range(10000):
            x = fhn_picard_matrix_step(params, x_prev, x, dt)
            residual = (x - x_prev) - dt * fhn_rhs(params, x)
            if np.linalg.norm(residual) <= tol:
                return x
        raise ConvergenceError(
            f"lagged-cubic iteration did not reach tol={tol:g} at dt={dt:g}",
            best=x,
            residual_norm=float(np.linalg.norm(residual)),
        )

    return ODESystem(dim=2, rhs=rhs, ground_truth=step_oracle)


# ---------------------------------------------------------------------------
# Tensor grids and stencil helpers


@dataclass(frozen=True)
class GridSpec:
    """Uniform tensor grid on a box with homogeneous Dirichlet boundaries.

    ``cells`` counts elements per axis (1 to 3 axes, at least 2 each);
    unknowns sit on the interior nodes, so axis ``a`` contributes
    ``cells[a] - 1`` degrees of freedom.
    """

    cells: tuple[int, ...]
    extent: tuple[float, ...] = ()

    def __post_init__(self):
        cells = tuple(int(c) for c in np.atleast_1d(self.cells))
        if not 1 <= len(cells) <= 3:
            raise ValueError("grids have 1 to 3 axes")
        if any(c < 2 for c in cells):
            raise ValueError("need at least 2 cells per axis")
        extent = self.extent or (1.0,) * len(cells)
        extent = tuple(float(e) for e in np.atleast_1d(extent))
        if len(extent) != len(cells) or any(e <= 0.0 for e in extent):
            raise ValueError("extent must give one positive length per axis")
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "extent", extent)

    @property
    def ndim(self) -> int:
        return len(self.cells)

    @property
    def h(self) -> tuple[float, ...]:
        return tuple(e / c for e, c in zip(self.extent, self.cells))

    @property
    def interior_shape(self) -> tuple[int, ...]:
        return tuple(c - 1 for c in self.cells)

    @property
    def ndof(self) -> int:
        return int(np.prod(self.interior_shape))

    def interior_coordinates(self) -> list[np.ndarray]:
        """Meshgrid ('ij') of interior node coordinates, one array per axis."""
        axes = [
            h * np.arange(1, c)
            for h, c in zip(self.h, self.cells)
        ]
        return list(np.meshgrid(*axes, indexing="ij"))

    def square(self) -> bool:
        return len(set(self.cells)) == 1 and len(set(self.extent)) == 1


def _neighbor_sum(u: np.ndarray, axis: int) -> np.ndarray:
    """u_{i-1} + u_{i+1} along ``axis`` with zero Dirichlet neighbors."""
    out = np.zeros_like(u)
    lo = [slice(None)] * u.ndim
    hi = [slice(None)] * u.ndim
    lo[axis] = slice(None, -1)
    hi[axis] = slice(1, None)
    out[tuple(lo)] += u[tuple(hi)]
    out[tuple(hi)] += u[tuple(lo)]
    return out


def _fd_stiffness(u: np.ndarray, h: tuple[float, ...]) -> np.ndarray:
    """Second-order difference approximation of -Laplacian (positive form)."""
    out = np.zeros_like(u)
    for axis, ha in enumerate(h):
        out += (2.0 * u - _neighbor_sum(u, axis)) / (ha * ha)
    return out


def _fe_stiffness_1d(u, axis, ha):
    return (2.0 * u - _neighbor_sum(u, axis)) / ha


def _fe_mass_1d(u, axis, ha):
    return (ha / 6.0) * (4.0 * u + _neighbor_sum(u, axis))


def _fe_stiffness(u: np.ndarray, h: tuple[float, ...]) -> np.ndarray:
    """Tensor-product multilinear-element stiffness action."""
    out = np.zeros_like(u)
    for axis_k in range(u.ndim):
        term = u
        for axis in range(u.ndim):
            if axis == axis_k:
                term = _fe_stiffness_1d(term, axis, h[axis])
            else:
                term = _fe_mass_1d(term, axis, h[axis])
        out += term
    return out


def _fe_mass(u: np.ndarray, h: tuple[float, ...]) -> np.ndarray:
    """Tensor-product multilinear-element consistent mass action."""
    for axis, ha in enumerate(h):
        u = _fe_mass_1d(u, axis, ha)
    return u


def default_initial_field(grid: GridSpec, amplitude: float = 1.0) -> np.ndarray:
    """Smooth Dirichlet-compatible default: product of half-period sines."""
    coords = grid.interior_coordinates()
    field = np.full(grid.interior_shape, amplitude)
    for x, length in zip(coords, grid.extent):
        field = field * np.sin(math.pi * x / length)
    return field.ravel()


# ---------------------------------------------------------------------------
# Heat problem


@dataclass(frozen=True)
class HeatProblem:
    """Linear diffusion on a grid: ``M u' = -mu K u`` after elimination.

    ``mass_mode`` selects identity mass with the difference stencil
    (``identity_fd``) or multilinear finite elements with lumped or
    consistent mass. ``u0`` maps the grid to an initial interior field.
    """

    grid: GridSpec
    mu: float = 0.1
    mass_mode: str = "identity_fd"
    u0: Optional[Callable[[GridSpec], np.ndarray]] = None

    def __post_init__(self):
        if self.mu <= 0.0:
            raise ValueError("diffusion coefficient must be positive")
        if self.mass_mode not in MASS_MODES:
            raise ValueError(f"mass_mode must be one of {MASS_MODES}")


def _heat_operators(problem: HeatProblem):
    grid = problem.grid
    h = grid.h
    shape = grid.interior_shape
    cell_volume = float(np.prod(h))

    if problem.mass_mode == "identity_fd":
        stiffness = lambda u: _fd_stiffness(u, h)
        mass = None
    else:
        stiffness = lambda u: _fe_stiffness(u, h)
        if problem.mass_mode == "lumped_fe":
            # Row sums of the consistent mass: one cell volume per node.
            diag = np.full(grid.ndof, cell_volume)
            mass = LinearOperator(
                dim=grid.ndof,
                apply=lambda x: cell_volume * x,
                symmetric=True,
                diagonal=diag,
            )
        else:
            diag_value = float(np.prod([4.0 * ha / 6.0 for ha in h]))
            mass = LinearOperator(
                dim=grid.ndof,
                apply=lambda x: _fe_mass(x.reshape(shape), h).ravel(),
                symmetric=True,
                diagonal=np.full(grid.ndof, diag_value),
            )
    return stiffness, mass


def heat_system(problem: HeatProblem) -> ODESystem:
    """Diffusion as an ODESystem on the eliminated interior unknowns."""
    grid = problem.grid
    stiffness, mass = _heat_operators(problem)
    shape = grid.interior_shape
    mu = problem.mu

    def rhs(t, u):
        return -mu * stiffness(u.reshape(shape)).ravel()

    return ODESystem(dim=grid.ndof, rhs=rhs, mass=mass)


def stiffness_operator(problem: HeatProblem) -> LinearOperator:
    """The (positive) stiffness action for this problem's discretization."""
    grid = problem.grid
    stiffness, _ = _heat_operators(problem)
    shape = grid.interior_shape
    return LinearOperator(
        dim=grid.ndof,
        apply=lambda u: stiffness(u.reshape(shape)).ravel(),
        symmetric=True,
    )


def mass_operator(problem: HeatProblem) -> LinearOperator:
    """The mass action for this problem (identity for the FD mode)."""
    _, mass = _heat_operators(problem)
    return mass if mass is not None else LinearOperator.identity(problem.grid.ndof)


def _tensor_spectrum_max(problem: HeatProblem) -> float:
    """Exact largest eigenvalue of M^-1 K from the shared discrete-sine basis."""
    grid = problem.grid
    h = grid.h
    shape = grid.interior_shape
    stiff_axis = []
    mass_axis = []
    for cells, ha in zip(grid.cells, h):
        theta = np.arange(1, cells) * math.pi / cells
        cos_t = np.cos(theta)
        if problem.mass_mode == "identity_fd":
            stiff_axis.append((2.0 / (ha * ha)) * (1.0 - cos_t))
            mass_axis.append(np.ones(cells - 1))
        else:
            stiff_axis.append((2.0 / ha) * (1.0 - cos_t))
            mass_axis.append((ha / 6.0) * (4.0 + 2.0 * cos_t))
    lam = np.zeros(shape)
    for axis_k in range(grid.ndim):
        term = np.ones(shape)
        for axis in range(grid.ndim):
            vec = stiff_axis[axis] if axis == axis_k else mass_axis[axis]
            reshape = [1] * grid.ndim
            reshape[axis] = -1
            term = term * vec.reshape(reshape)
        lam += term
    if problem.mass_mode == "identity_fd":
        return float(lam.max())
    if problem.mass_mode == "lumped_fe":
        return float(lam.max()) / float(np.prod(h))
    mass_grid = np.ones(shape)
    for axis in range(grid.ndim):
        reshape = [1] * grid.ndim
        reshape[axis] = -1
        mass_grid = mass_grid * mass_axis[axis].reshape(reshape)
    return float((lam / mass_grid).max())


def _power_iteration_lambda_max(problem: HeatProblem, tol: float = 1e-8) -> float:
    """Largest generalized eigenvalue of (K, M) by power iteration on M^-1 K."""
    stiffness = stiffness_operator(problem)
    mass = mass_operator(problem)
    rng = np.random.default_rng(1892)
    z = rng.standard_normal(problem.grid.ndof)
    z /= np.linalg.norm(z)
    lam = 0.0
    for _ in range(200_000):
        kz = stiffness(z)
        w, _ = cg_solve(mass, kz, precond=mass.diagonal, tol=1e-12)
        lam_new = float(z @ kz) / float(z @ mass(z))
        z = w / np.linalg.norm(w)
        if lam_new > 0.0 and abs(lam_new - lam) <= tol * lam_new:
            return lam_new
        lam = lam_new
    raise ConvergenceError("power iteration for the stability threshold stalled")


def cfl_threshold(problem: HeatProblem) -> float:
    """Largest dt for which the plain (depth-0) step iteration contracts.

    Equals ``1 / (mu * lambda_max(M^-1 K))``: the exact tensor-grid spectrum
    for the identity and lumped mass modes, a power-iteration estimate for
    the consistent mass.
    """
    if problem.mass_mode == "consistent_fe":
        lam = _power_iteration_lambda_max(problem)
    else:
        lam = _tensor_spectrum_max(problem)
    return 1.0 / (problem.mu * lam)


# ---------------------------------------------------------------------------
# Nonlinear diffusion with a p-Laplacian flux


@dataclass(frozen=True)
class PLaplacianParams:
    """Nonlinear diffusion exponent ``p >= 2`` with optional regularization.

    The flux weight is ``(|grad u|^2 + regularization^2)^((p-2)/2)``;
    exponents below 2 need special handling and are rejected.
    """

    grid: GridSpec
    p: float = 2.0
    regularization: float = 0.0

    def __post_init__(self):
        if self.p < 2.0:
            raise ValueError("exponent p must be at least 2")
        if self.regularization < 0.0:
            raise ValueError("regularization must be non-negative")


def _embed_full(u: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Interior field padded with the zero Dirichlet boundary layer."""
    full = np.zeros(tuple(c + 1 for c in grid.cells))
    inner = tuple(slice(1, -1) for _ in grid.cells)
    full[inner] = u.reshape(grid.interior_shape)
    return full


def _pair_average(v: np.ndarray, axis: int) -> np.ndarray:
    lo = [slice(None)] * v.ndim
    hi = [slice(None)] * v.ndim
    lo[axis] = slice(None, -1)
    hi[axis] = slice(1, None)
    return 0.5 * (v[tuple(lo)] + v[tuple(hi)])


def plaplacian_system(params: PLaplacianParams) -> ODESystem:
    """Nonlinear diffusion ``u' = div(|grad u|^(p-2) grad u)`` on the grid.

    Gradients are formed per cell center by averaged one-sided differences;
    the resulting scalar weight multiplies the face-normal differences, so
    at p = 2 the operator collapses exactly to the linear difference stencil.
    """
    grid = params.grid
    h = grid.h
    exponent = (params.p - 2.0) / 2.0
    eps2 = params.regularization**2

    def rhs(t, u):
        full = _embed_full(u, grid)
        diffs = []
        grad2 = None
        for axis in range(grid.ndim):
            d = np.diff(full, axis=axis) / h[axis]
            diffs.append(d)
            g = d
            for other in range(grid.ndim):
                if other != axis:
                    g = _pair_average(g, other)
            grad2 = g * g if grad2 is None else grad2 + g * g
        weight = np.power(grad2 + eps2, exponent)
        out = np.zeros(grid.interior_shape)
        for axis in range(grid.ndim):
            w_face = weight
            d = diffs[axis]
            for other in range(grid.ndim):
                if other != axis:
                    w_face = _pair_average(w_face, other)
                    # Restrict the normal differences to interior positions.
                    sl = [slice(None)] * d.ndim
                    sl[other] = slice(1, -1)
                    d = d[tuple(sl)]
            out += np.diff(w_face * d, axis=axis) / h[axis]
        return out.ravel()

    return ODESystem(dim=grid.ndof, rhs=rhs)


# ---------------------------------------------------------------------------
# Viscous transport in one dimension


@dataclass(frozen=True)
class BurgersParams:
    """1-D viscous transport: self-advection plus diffusion ``nu``."""

    grid: GridSpec
    nu: float = 0.05
    u0: Optional[Callable[[GridSpec], np.ndarray]] = None

    def __post_init__(self):
        if self.grid.ndim != 1:
            raise ValueError("this problem is one-dimensional")
        if self.nu <= 0.0:
            raise ValueError("viscosity must be positive")


def burgers_system(params: BurgersParams) -> ODESystem:
    """Self-advecting viscous flow with central differences, zero endpoints."""
    grid = params.grid
    ha = grid.h[0]

    def rhs(t, u):
        convect = np.zeros_like(u)
        convect[:-1] += u[1:]
        convect[1:] -= u[:-1]
        convect /= 2.0 * ha
        diffuse = (_neighbor_sum(u, 0) - 2.0 * u) / (ha * ha)
        return -u * convect + params.nu * diffuse

    return ODESystem(dim=grid.ndof, rhs=rhs)


def initial_state(problem) -> np.ndarray:
    """Initial interior field for a heat/transport problem (u0 or default)."""
    generator = getattr(problem, "u0", None)
    if generator is not None:
        return np.asarray(generator(problem.grid), dtype=float).ravel()
    return default_initial_field(problem.grid)
