"""Bosonic N-body ground states on the tensor grid (one dimension per particle).

    H_N = sum_i (-d_i^2 + V(x_i)) + sum_{i<j} v_N(x_i - x_j)

Coordinates are stored with particle 1 on axis 0. The flow keeps the iterate in
the symmetric sector by averaging over coordinate permutations.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (DomainError, Grid, GridFunction, PairPotential, TrapPotential,
                   default_floor, gaussian_state, gradient, integrate_out, laplacian_bound,
                   negative_laplacian, scale_pair_potential, tensor_power)
from .flow import STEP_SAFETY, FlowParams, run_flow

DEFAULT_BUDGET = 10_000_000


class BudgetError(RuntimeError):
    def __init__(self, required: int, budget: int):
        super().__init__(f"tensor grid needs {required} points, budget is {budget}; "
                         f"raise the budget to at least {required} or coarsen the grid")
        self.required = required
        self.budget = budget


@dataclass(frozen=True, eq=False)
class NBodyState:
    psi: GridFunction
    energy: float
    kinetic: float  # per particle, averaged over coordinates
    trap: float
    interaction: float
    N: int
    beta: float
    residual: float
    iterations: int

    @property
    def grid(self) -> Grid:
        return self.psi.grid

    @property
    def components(self) -> dict:
        return {"kinetic": self.kinetic, "trap": self.trap, "interaction": self.interaction}

    def density(self) -> np.ndarray:
        return self.psi.values ** 2


def _axis_shape(N: int, axis: int) -> tuple[int, ...]:
    shape = [1] * N
    shape[axis] = -1
    return tuple(shape)


def trap_sum(grid: Grid, V: TrapPotential, N: int) -> np.ndarray:
    v = V.on_grid(grid)
    out = np.zeros(grid.shape(N))
    for i in range(N):
        out = out + v.reshape(_axis_shape(N, i))
    return out


def pair_matrix(grid: Grid, v0: PairPotential, N: int, beta: float) -> np.ndarray:
    """v_N(x_a - x_b) for all node pairs, read from a table on the difference grid."""
    vN = scale_pair_potential(v0, N, beta)
    n = grid.n
    table = vN(grid.h * np.arange(-(n - 1), n))
    idx = np.arange(n)
    return table[idx[:, None] - idx[None, :] + n - 1]


def pair_sum(grid: Grid, v0: PairPotential, N: int, beta: float,
             first_only: bool = False) -> np.ndarray:
    """sum_{i<j} v_N(x_i - x_j); with first_only, sum_{j>=2} v_N(x_1 - x_j)."""
    out = np.zeros(grid.shape(N))
    if N < 2 or v0.profile == "zero":
        return out
    mat = pair_matrix(grid, v0, N, beta)
    for i in range(1 if first_only else N):
        for j in range(i + 1, N):
            shape = [1] * N
            shape[i] = shape[j] = grid.n
            out = out + mat.reshape(shape)
    return out


def symmetrize(psi: np.ndarray) -> np.ndarray:
    """Average over all permutations of the axes.

    Built up one axis at a time: S_{k+1} = (1 + sum_{i<k} (i k)) S_k / (k + 1),
    which costs N (N - 1) / 2 transposed copies instead of N!.
    """
    for k in range(1, psi.ndim):
        acc = psi.copy()
        for i in range(k):
            acc += np.swapaxes(psi, i, k)
        acc /= k + 1
        psi = acc
    return psi


def _check(grid: Grid, N: int, budget: int):
    if grid.d != 1:
        raise DomainError("N-body ground states are computed for d = 1 only")
    if not 1 <= N <= 4:
        raise DomainError(f"N must lie in [1, 4], got {N}")
    size = grid.n ** N
    if size > budget:
        raise BudgetError(size, budget)


def canonical_psi(psi: np.ndarray, cell: float) -> np.ndarray:
    """Clip roundoff negatives, symmetrize and normalize a flow iterate."""
    psi = symmetrize(np.where(psi > 0, psi, 0.0))
    psi /= math.sqrt(cell * float(np.sum(psi * psi)))
    return psi


def evaluate_nbody(psi: np.ndarray, V: TrapPotential, v0: PairPotential, N: int, beta: float,
                   grid: Grid, order: int = 4, iterations: int = 0, trap_scale: float = 1.0,
                   pair_scale: float = 1.0) -> NBodyState:
    """Energy bookkeeping for a given normalized symmetric Psi (left untouched)."""
    _check(grid, N, max(DEFAULT_BUDGET, grid.n ** N))
    cell = grid.h ** N
    trap_total = trap_scale * trap_sum(grid, V, N)
    pair_total = pair_scale * pair_sum(grid, v0, N, beta)
    lap = negative_laplacian(psi, grid.h, order)
    rho = psi * psi
    kinetic = cell * float(np.sum(psi * lap)) / N
    trap = cell * float(np.sum(trap_total * rho)) / N
    interaction = cell * float(np.sum(pair_total * rho)) / N
    energy = N * (kinetic + trap + interaction)
    lap += (trap_total + pair_total) * psi
    lap -= energy * psi
    residual = math.sqrt(cell * float(np.sum(lap * lap)))
    return NBodyState(GridFunction(grid, psi, N, normalized=True), energy, kinetic, trap,
                      interaction, N, beta, residual, iterations)


def _solve(V, v0, N, beta, grid, params, init, trap_scale, pair_scale, budget):
    _check(grid, N, budget)
    if v0.dim != 1:
        raise DomainError("pair potential must be one-dimensional here")
    order = params.stencil_order
    trap_total = trap_scale * trap_sum(grid, V, N)
    pair_total = pair_scale * pair_sum(grid, v0, N, beta) if N >= 2 else np.zeros(grid.shape(N))
    potential = trap_total + pair_total
    if init is None:
        psi0 = gaussian_state(grid, V.width() * trap_scale ** -0.25, N)
    else:
        psi0 = np.array(init, dtype=np.float64)
        if psi0.shape != grid.shape(N):
            raise DomainError("initial state has the wrong shape")
    psi0 = symmetrize(psi0)
    cell = grid.h ** N
    out = np.empty_like(psi0)
    tmp = np.empty_like(psi0)

    def apply_h(psi):
        hpsi = negative_laplacian(psi, grid.h, order, out=out, tmp=tmp)
        np.multiply(potential, psi, out=tmp)
        hpsi += tmp
        return hpsi

    def energy_of(psi, hpsi, mu):
        return mu

    tau = params.time_step
    if tau is None:
        tau = STEP_SAFETY / (laplacian_bound(grid.h, N, order) + float(np.max(potential)))
    res = run_flow(psi0, apply_h, energy_of, cell, tau, params, project=symmetrize)
    return evaluate_nbody(canonical_psi(res.phi, cell), V, v0, N, beta, grid, order,
                          res.iterations, trap_scale, pair_scale)


def minimize_nbody(V: TrapPotential, v0: PairPotential, N: int, beta: float, grid: Grid,
                   params: FlowParams = FlowParams(), init: np.ndarray | None = None,
                   budget: int = DEFAULT_BUDGET) -> NBodyState:
    if N >= 2:
        scale_pair_potential(v0, N, beta)  # validates N and beta
    return _solve(V, v0, N, beta, grid, params, init, 1.0, 1.0, budget)


def perturbed_nbody_energy(which: str, lam: float, V: TrapPotential, v0: PairPotential,
                           N: int, beta: float, grid: Grid, params: FlowParams = FlowParams(),
                           init: np.ndarray | None = None,
                           budget: int = DEFAULT_BUDGET) -> NBodyState:
    """Ground state with lam multiplying the trap or the pair term."""
    if which not in ("trap", "interaction"):
        raise DomainError(f"unknown perturbation {which!r}")
    if not lam > 0:
        raise DomainError("lambda must be positive")
    scale_pair_potential(v0, N, beta)
    if which == "trap":
        return _solve(V, v0, N, beta, grid, params, init, lam, 1.0, budget)
    return _solve(V, v0, N, beta, grid, params, init, 1.0, lam, budget)


def nbody_hellmann_feynman(which: str, lam: float, delta: float, V, v0, N, beta, grid,
                           params: FlowParams = FlowParams()) -> dict:
    """Per-particle centered difference of E_N(lam) against the matching component."""
    if not 0 < delta < lam:
        raise DomainError("need 0 < delta < lambda")
    mid = perturbed_nbody_energy(which, lam, V, v0, N, beta, grid, params)
    warm = mid.psi.values
    up = perturbed_nbody_energy(which, lam + delta, V, v0, N, beta, grid, params, init=warm)
    down = perturbed_nbody_energy(which, lam - delta, V, v0, N, beta, grid, params, init=warm)
    lhs = (up.energy - down.energy) / (2.0 * delta * N)
    rhs = (mid.trap if which == "trap" else mid.interaction) / lam
    return {"lhs": lhs, "rhs": rhs, "gap": abs(lhs - rhs)}


def marginal_density(state: NBodyState, k: int) -> GridFunction:
    """rho^(k): |Psi|^2 integrated over particles k+1..N."""
    if not 1 <= k < state.N:
        raise DomainError(f"marginal order must lie in [1, N), got {k}")
    rho = integrate_out(state.density(), state.grid, k)
    return GridFunction(state.grid, rho, k)


def nbody_energy_components(state: NBodyState, V: TrapPotential, v0: PairPotential,
                            order: int = 4) -> dict:
    """Kinetic, trap and interaction energy carried by particle 1."""
    grid, N = state.grid, state.N
    psi = state.psi.values
    cell = grid.h ** N
    from scipy.ndimage import correlate1d
    stencil = {2: np.array([-1.0, 2.0, -1.0]),
               4: np.array([1.0, -16.0, 30.0, -16.0, 1.0]) / 12.0}[order] / grid.h**2
    lap1 = correlate1d(psi, stencil, axis=0, mode="constant", cval=0.0)
    rho = psi * psi
    kinetic = cell * float(np.sum(psi * lap1))
    trap = cell * float(np.sum(V.on_grid(grid).reshape(_axis_shape(N, 0)) * rho))
    pair = pair_sum(grid, v0, N, state.beta, first_only=True)
    interaction = 0.5 * cell * float(np.sum(pair * rho))
    return {"kinetic": kinetic, "trap": trap, "interaction": interaction}


def log_gradient(rho: np.ndarray, h: float, axis: int, floor: float | None = None,
                 order: int = 2) -> np.ndarray:
    """Half the derivative of log max(rho, floor) along one axis, zero below the floor."""
    if floor is None:
        floor = default_floor(rho)
    out = 0.5 * gradient(np.log(np.maximum(rho, floor)), h, axis, order)
    out[rho < floor] = 0.0
    return out


def nbody_drift_component(state: NBodyState, floor: float | None = None,
                          order: int = 2) -> GridFunction:
    """b_1 = d_1 log(rho_N) / 2 on the tensor grid."""
    b1 = log_gradient(state.density(), state.grid.h, 0, floor, order)
    return GridFunction(state.grid, b1, state.N)


def product_state(phi: GridFunction, N: int) -> np.ndarray:
    return tensor_power(phi.values, N)
