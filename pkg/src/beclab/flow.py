"""Normalized gradient flow (imaginary time with renormalization).

One step, for a Hamiltonian H that may depend on the iterate:

    mu   = <phi, H phi>
    r    = H phi - mu phi
    phi <- (phi - tau r) / ||phi - tau r||

The step is orthogonal to phi, so the pre-normalization norm is >= 1 and the
energy cannot increase while tau stays below 2 / lambda_max.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import DomainError


class ConvergenceError(RuntimeError):
    """The flow hit its iteration cap; ``last`` holds the final iterate."""

    def __init__(self, message: str, last: np.ndarray, energy: float, residual: float):
        super().__init__(message)
        self.last = last
        self.energy = energy
        self.residual = residual


class MonotonicityError(RuntimeError):
    pass


@dataclass(frozen=True)
class FlowParams:
    time_step: float | None = None  # None: 1.6 / (spectral bound of H)
    max_iterations: int = 200_000
    energy_tol: float = 1e-13
    residual_tol: float = 1e-8
    stencil_order: int = 4
    symmetrize_every: int = 1

    def __post_init__(self):
        if self.time_step is not None and not self.time_step > 0:
            raise DomainError("time step must be positive")
        if not (self.energy_tol > 0 and self.residual_tol > 0):
            raise DomainError("tolerances must be positive")
        if self.max_iterations < 1 or self.symmetrize_every < 1:
            raise DomainError("iteration counts must be positive")
        if self.stencil_order not in (2, 4):
            raise DomainError("stencil order must be 2 or 4")

    def describe(self) -> dict:
        return {"time_step": self.time_step, "max_iterations": self.max_iterations,
                "energy_tol": self.energy_tol, "residual_tol": self.residual_tol,
                "stencil_order": self.stencil_order, "symmetrize_every": self.symmetrize_every}


STEP_SAFETY = 1.6
MONOTONE_SLACK = 1e-12


@dataclass
class FlowResult:
    phi: np.ndarray
    energy: float
    mu: float
    residual: float
    iterations: int
    energies: list[float]


def run_flow(phi0: np.ndarray, apply_h: Callable[[np.ndarray], np.ndarray],
             energy_of: Callable[[np.ndarray, np.ndarray, float], float],
             cell: float, tau: float, params: FlowParams,
             project: Callable[[np.ndarray], np.ndarray] | None = None,
             record: bool = False) -> FlowResult:
    """Iterate until both the energy change and the residual fall below tolerance.

    ``cell`` is the quadrature weight h^D (face nodes are pinned to zero, so
    the tensor trapezoid rule reduces to a plain sum). ``energy_of`` receives
    (phi, H phi, mu).
    """
    phi = np.array(phi0, dtype=np.float64)
    phi /= math.sqrt(cell * np.sum(phi * phi))
    prev = math.inf
    energies: list[float] = []
    energy = residual = math.nan
    for it in range(params.max_iterations):
        hphi = apply_h(phi)
        mu = cell * float(np.sum(phi * hphi))
        energy = energy_of(phi, hphi, mu)
        if energy > prev + MONOTONE_SLACK:
            raise MonotonicityError(
                f"energy rose from {prev!r} to {energy!r} at iteration {it}")
        hphi -= mu * phi
        residual = math.sqrt(cell * float(np.sum(hphi * hphi)))
        if record:
            energies.append(energy)
        if abs(prev - energy) < params.energy_tol and residual < params.residual_tol:
            return FlowResult(phi, energy, mu, residual, it, energies)
        prev = energy
        hphi *= tau
        phi -= hphi
        if project is not None and (it + 1) % params.symmetrize_every == 0:
            phi = project(phi)
        phi /= math.sqrt(cell * float(np.sum(phi * phi)))
    raise ConvergenceError(
        f"no convergence in {params.max_iterations} iterations "
        f"(energy {energy:.12g}, residual {residual:.3e})", phi, energy, residual)
