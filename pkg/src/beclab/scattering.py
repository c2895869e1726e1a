"""Zero-energy scattering in three dimensions, radially reduced.

With u(r) = r f(r) the zero-energy equation reads u'' = c v(r) u, u(0) = 0,
u'(0) = 1. Outside the support u is linear and its root is the scattering
length a. The constant c is fixed at 1, which makes 4 pi a -> int v for weak
potentials (the Born limit).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import solve_banded

from .core import DomainError, PairPotential, radial_integral

SCATTERING_CONSTANT = 1.0


class MatchingError(ArithmeticError):
    pass


@dataclass(frozen=True, eq=False)
class ScatteringResult:
    a: float
    R: float
    born: float  # g / (4 pi)
    r: np.ndarray
    u: np.ndarray

    @property
    def four_pi_a(self) -> float:
        return 4.0 * math.pi * self.a


def _profile(v) -> tuple[Callable, float]:
    if isinstance(v, PairPotential):
        if v.dim != 3:
            raise DomainError("scattering lengths are defined for d = 3 potentials")
        return v, v.support_radius
    func, radius = v
    return func, float(radius)


def scattering_length(v, Rmax: float | None = None, samples: int = 401) -> ScatteringResult:
    """``v`` is a 3D PairPotential or a (callable, support radius) pair."""
    func, support = _profile(v)
    R = support if Rmax is None else float(Rmax)
    if R < support:
        raise DomainError("matching radius lies inside the support")
    g = radial_integral(func, support, 3) if support > 0 else 0.0
    r = np.linspace(0.0, R, samples)
    if g == 0.0:
        return ScatteringResult(0.0, R, 0.0, r, r.copy())

    def rhs(x, s):
        return [s[1], SCATTERING_CONSTANT * float(func(x)) * s[0]]

    inside = r[r <= support]
    sol = solve_ivp(rhs, (0.0, support), [0.0, 1.0], method="DOP853", rtol=1e-12,
                    atol=1e-14, max_step=support / 200.0, t_eval=inside)
    u_s, du_s = sol.y[0, -1], sol.y[1, -1]
    if du_s == 0.0:
        raise MatchingError("u' vanishes at the matching radius")
    a = support - u_s / du_s
    outside = r[r > support]
    u = np.concatenate([sol.y[0], u_s + du_s * (outside - support)])
    # rescale so the outer branch reads r - a, the usual normalization
    return ScatteringResult(float(a), R, g / (4.0 * math.pi), r, u / du_s)


def scaled_scattering_potential(v0: PairPotential, N: int, beta: float) -> tuple[Callable, float]:
    """u0^N(r) = N^(3 beta - 3) v0(N^(beta - 1) r); its integral stays g."""
    if v0.dim != 3:
        raise DomainError("scattering sweep needs a d = 3 pair potential")
    if not 0 < beta < 1:
        raise DomainError("beta must lie in (0, 1)")
    if N < 1:
        raise DomainError("N must be positive")
    pre = float(N) ** (3.0 * beta - 3.0)
    stretch = float(N) ** (beta - 1.0)
    return (lambda r: pre * v0(stretch * np.asarray(r))), v0.support_radius / stretch


@dataclass(frozen=True)
class ScatteringRow:
    N: int
    a: float
    four_pi_a: float
    g: float

    @property
    def gap(self) -> float:
        return self.g - self.four_pi_a


def scattering_limit_sweep(v0: PairPotential, beta: float, Ns: Sequence[int]) -> list[ScatteringRow]:
    Ns = [int(N) for N in Ns]
    if any(b <= a for a, b in zip(Ns, Ns[1:])):
        raise DomainError("Ns must be strictly increasing")
    g = v0.coupling if v0.profile != "zero" else 0.0
    rows = []
    for N in Ns:
        if g == 0.0:
            rows.append(ScatteringRow(N, 0.0, 0.0, 0.0))
            continue
        res = scattering_length(scaled_scattering_potential(v0, N, beta))
        rows.append(ScatteringRow(N, res.a, res.four_pi_a, g))
    return rows


def ball_formula(a: float, R: float) -> float:
    if not R > a:
        raise DomainError("ball radius must exceed the scattering length")
    return 4.0 * math.pi * a * R / (R - a)


def ball_energy(v, R: float, cells: int = 20000) -> float:
    """min of int_{B_R} |grad f|^2 + c v f^2 over radial f with f(R) = 1.

    The quadratic form is discretized on a uniform radial mesh (midpoint rule
    for the gradient, trapezoid for the potential) and minimized exactly by a
    tridiagonal solve.
    """
    func, support = _profile(v)
    if R < support:
        raise DomainError("ball radius must cover the support")
    dr = R / cells
    r = dr * np.arange(cells + 1)
    mid = r[:-1] + 0.5 * dr
    stiff = mid ** 2 / dr  # coupling weights between neighbours
    w = np.full(cells + 1, dr)
    w[0] = w[-1] = 0.5 * dr
    pot = SCATTERING_CONSTANT * np.asarray(func(r), dtype=np.float64) * r ** 2 * w
    # unknowns f_0..f_{M-1}; f_M = 1
    diag = pot[:-1].copy()
    diag[:-1] += stiff[:-1]
    diag[1:] += stiff[:-1]
    diag[-1] += stiff[-1]
    off = -stiff[:-1]
    rhs = np.zeros(cells)
    rhs[-1] = stiff[-1]
    ab = np.zeros((3, cells))
    ab[0, 1:] = off[:cells - 1]
    ab[1] = diag
    ab[2, :-1] = off[:cells - 1]
    f = solve_banded((1, 1), ab, rhs)
    full = np.append(f, 1.0)
    grad = np.diff(full) ** 2 * stiff
    return 4.0 * math.pi * (float(np.sum(grad)) + float(np.sum(pot * full ** 2)))


def ball_energy_check(v, R: float, cells: int = 20000) -> dict:
    res = scattering_length(v)
    numeric = ball_energy(v, R, cells)
    formula = ball_formula(res.a, R)
    gap = abs(numeric - formula)
    return {"numeric": numeric, "formula": formula, "a": res.a, "gap": gap,
            "relative_gap": gap / formula if formula else gap}
