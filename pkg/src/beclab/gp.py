"""Ground states of the one-body nonlinear Schroedinger and Hartree functionals.

    E_nls[phi] = int |grad phi|^2 + V phi^2 + g phi^4
    E_H[phi]   = int |grad phi|^2 + V phi^2 + int int phi^2(r) v0(r - r') phi^2(r')

Both are minimized over L2-normalized phi by the normalized gradient flow in
:mod:`beclab.flow`, on the box with phi = 0 on its faces.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .core import (DomainError, Grid, GridFunction, PairPotential, TrapPotential,
                   gaussian_state, laplacian_bound, negative_laplacian)
from .flow import STEP_SAFETY, FlowParams, run_flow

BOUNDARY_THRESHOLD = 1e-6


@dataclass(frozen=True, eq=False)
class NlsSolution:
    phi: GridFunction
    energy: float
    kinetic: float
    trap: float
    interaction: float
    mu: float
    residual: float
    iterations: int
    coupling: float
    boundary_warning: bool
    model: str = "nls"

    @property
    def components(self) -> dict:
        return {"kinetic": self.kinetic, "trap": self.trap, "interaction": self.interaction}

    @property
    def quartic(self) -> float:
        """int phi^4."""
        return float(self.phi.grid.h ** self.phi.grid.d * np.sum(self.phi.values ** 4))


def _cell(grid: Grid) -> float:
    return grid.h ** grid.d


def _initial(grid: Grid, trap: TrapPotential) -> np.ndarray:
    return gaussian_state(grid, trap.width())


def _boundary_mass(phi: np.ndarray) -> float:
    """Largest |phi| on the nodes next to the box faces."""
    worst = 0.0
    for axis in range(phi.ndim):
        for k in (1, -2):
            idx = [slice(None)] * phi.ndim
            idx[axis] = k
            worst = max(worst, float(np.max(np.abs(phi[tuple(idx)]))))
    return worst


def nls_residual(phi: GridFunction, mu: float, V, g: float, order: int = 4) -> float:
    """L2 norm of -Lap phi + V phi + 2 g phi^3 - mu phi over the interior nodes."""
    grid = phi.grid
    v = V.on_grid(grid) if isinstance(V, TrapPotential) else np.asarray(V)
    f = phi.values
    r = negative_laplacian(f, grid.h, order) + (v + 2.0 * g * f * f - mu) * f
    inner = tuple(slice(1, -1) for _ in range(f.ndim))
    return math.sqrt(_cell(grid) * float(np.sum(r[inner] ** 2)))


def canonical_phi(phi: np.ndarray, grid: Grid) -> np.ndarray:
    """Positive part of a flow iterate, normalized; clears -0.0 and roundoff."""
    phi = np.where(phi > 0, phi, 0.0)
    phi /= math.sqrt(_cell(grid) * float(np.sum(phi * phi)))
    return phi


def evaluate_nls(phi: np.ndarray, grid: Grid, vvals: np.ndarray, g: float, order: int = 4,
                 iterations: int = 0, model: str = "nls", kernel=None) -> NlsSolution:
    """Energy bookkeeping for a given normalized phi (left untouched)."""
    cell = _cell(grid)
    interior = tuple(slice(1, -1) for _ in range(phi.ndim))
    if not np.all(phi[interior] > 0):
        raise DomainError("ground state is not strictly positive on the interior nodes")
    lap = negative_laplacian(phi, grid.h, order)
    rho = phi * phi
    kinetic = cell * float(np.sum(phi * lap))
    trap = cell * float(np.sum(vvals * rho))
    if model == "nls":
        interaction = g * cell * float(np.sum(rho * rho))
        hphi = lap + (vvals + 2.0 * g * rho) * phi
    else:
        conv = kernel(rho)
        interaction = cell * float(np.sum(rho * conv))
        hphi = lap + (vvals + 2.0 * conv) * phi
    energy = kinetic + trap + interaction
    mu = energy + interaction
    r = hphi - mu * phi
    residual = math.sqrt(cell * float(np.sum(r * r)))
    return NlsSolution(GridFunction(grid, phi, 1, normalized=True), energy, kinetic, trap,
                       interaction, mu, residual, iterations, g,
                       _boundary_mass(phi) > BOUNDARY_THRESHOLD, model)


def _finish_nls(grid, phi, vvals, g, order, iterations, model="nls", kernel=None) -> NlsSolution:
    return evaluate_nls(canonical_phi(phi, grid), grid, vvals, g, order, iterations, model, kernel)


def _solve_local(grid: Grid, vvals: np.ndarray, g: float, params: FlowParams,
                 init: np.ndarray | None) -> NlsSolution:
    if g < 0:
        raise DomainError("coupling g must be non-negative")
    order = params.stencil_order
    cell = _cell(grid)
    phi0 = np.array(init if init is not None else gaussian_state(grid, 1.0), dtype=np.float64)
    tmp = np.empty_like(phi0)
    out = np.empty_like(phi0)

    def apply_h(phi):
        hphi = negative_laplacian(phi, grid.h, order, out=out, tmp=tmp)
        hphi += (vvals + 2.0 * g * phi * phi) * phi
        return hphi

    def energy_of(phi, hphi, mu):
        return mu - g * cell * float(np.sum(phi ** 4))

    tau = params.time_step
    if tau is None:
        peak = float(np.max(phi0 ** 2)) / (cell * float(np.sum(phi0 ** 2)))
        tau = STEP_SAFETY / (laplacian_bound(grid.h, grid.d, order) + float(np.max(vvals))
                             + 12.0 * g * max(peak, 1.0))
    res = run_flow(phi0, apply_h, energy_of, cell, tau, params)
    return _finish_nls(grid, res.phi, vvals, g, order, res.iterations)


def minimize_nls(V: TrapPotential, g: float, grid: Grid, params: FlowParams = FlowParams(),
                 init: np.ndarray | None = None) -> NlsSolution:
    """Minimizer of the nlS functional with coupling g."""
    if init is None:
        init = _initial(grid, V)
    return _solve_local(grid, V.on_grid(grid), g, params, init)


def hartree_kernel(v0: PairPotential, grid: Grid):
    """rho -> (v0 * rho) at the nodes, by direct quadrature over the grid."""
    cell = _cell(grid)
    n = grid.n
    if grid.d == 1:
        x = grid.x
        mat = cell * v0(x[:, None] - x[None, :])
        return lambda rho: np.sum(mat * rho[None, :], axis=1)
    offsets = grid.h * np.arange(-(n - 1), n)
    axes = np.meshgrid(*([offsets] * grid.d), indexing="ij")
    table = cell * v0(np.sqrt(sum(a * a for a in axes)))
    return lambda rho: fftconvolve(rho, table, mode="same")


def minimize_hartree(V: TrapPotential, v0: PairPotential, grid: Grid,
                     params: FlowParams = FlowParams(),
                     init: np.ndarray | None = None) -> NlsSolution:
    """Minimizer of the Hartree functional (pair term without a 1/2 prefactor)."""
    if v0.dim != grid.d:
        raise DomainError("pair potential and grid dimensions differ")
    order = params.stencil_order
    cell = _cell(grid)
    vvals = V.on_grid(grid)
    kernel = hartree_kernel(v0, grid)
    phi0 = np.array(init if init is not None else _initial(grid, V), dtype=np.float64)
    tmp = np.empty_like(phi0)
    out = np.empty_like(phi0)
    g = v0.coupling
    state = {}

    def apply_h(phi):
        rho = phi * phi
        conv = kernel(rho)
        state["pair"] = cell * float(np.sum(rho * conv))
        hphi = negative_laplacian(phi, grid.h, order, out=out, tmp=tmp)
        hphi += (vvals + 2.0 * conv) * phi
        return hphi

    def energy_of(phi, hphi, mu):
        return mu - state["pair"]

    tau = params.time_step
    if tau is None:
        vmax = float(np.max(v0(np.linspace(0, v0.radius, 101))))
        tau = STEP_SAFETY / (laplacian_bound(grid.h, grid.d, order) + float(np.max(vvals))
                             + 12.0 * g * max(float(np.max(phi0 ** 2)), 1.0) + 4.0 * vmax)
    res = run_flow(phi0, apply_h, energy_of, cell, tau, params)
    return _finish_nls(grid, res.phi, vvals, g, order, res.iterations, "hartree", kernel)


def perturbed_nls_energy(which: str, lam: float, V: TrapPotential, g: float, grid: Grid,
                         params: FlowParams = FlowParams(),
                         init: np.ndarray | None = None) -> NlsSolution:
    """Minimizer with lam * V (which='trap') or lam * g (which='interaction')."""
    if which not in ("trap", "interaction"):
        raise DomainError(f"unknown perturbation {which!r}")
    if lam < 0 or (which == "trap" and lam == 0):
        raise DomainError("lambda must be positive")
    if init is None:
        init = _initial(grid, V)
    vvals = V.on_grid(grid)
    if which == "trap":
        return _solve_local(grid, lam * vvals, g, params, init)
    return _solve_local(grid, vvals, lam * g, params, init)


def hellmann_feynman_check(which: str, lam: float, delta: float, V: TrapPotential, g: float,
                           grid: Grid, params: FlowParams = FlowParams()) -> dict:
    """Centered difference of E(lam) against the matching component at lam."""
    if not 0 < delta < lam:
        raise DomainError("need 0 < delta < lambda")
    mid = perturbed_nls_energy(which, lam, V, g, grid, params)
    warm = mid.phi.values
    up = perturbed_nls_energy(which, lam + delta, V, g, grid, params, init=warm)
    down = perturbed_nls_energy(which, lam - delta, V, g, grid, params, init=warm)
    lhs = (up.energy - down.energy) / (2.0 * delta)
    if which == "trap":
        rhs = mid.trap / lam
    else:
        rhs = mid.interaction / lam
    return {"lhs": lhs, "rhs": rhs, "gap": abs(lhs - rhs)}
