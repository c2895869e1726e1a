"""Grids, potentials, densities and drifts shared by every solver.

Units follow hbar = 2m = 1: the kinetic energy density is |grad phi|^2 and the
diffusions are driven by a standard Brownian motion with drift grad(rho)/(2 rho),
which leaves rho invariant.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.ndimage import correlate1d


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class PhysicalConvention:
    kinetic_coefficient: float = 1.0
    diffusion_coefficient: float = 0.5


CONVENTION = PhysicalConvention()


# --------------------------------------------------------------------------- grids

@dataclass(frozen=True)
class Grid:
    """Isotropic box [-L, L]^d with n nodes per axis (both faces included)."""

    d: int
    L: float
    n: int

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise DomainError(f"dimension must be 1, 2 or 3, got {self.d}")
        if self.n < 8:
            raise DomainError(f"need at least 8 points per axis, got {self.n}")
        if not self.L > 0:
            raise DomainError("extent L must be positive")

    @property
    def h(self) -> float:
        return 2.0 * self.L / (self.n - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(-self.L, self.L, self.n)

    @property
    def weights(self) -> np.ndarray:
        w = np.full(self.n, self.h)
        w[0] = w[-1] = 0.5 * self.h
        return w

    def shape(self, particles: int = 1) -> tuple[int, ...]:
        return (self.n,) * (self.d * particles)

    def radius(self) -> np.ndarray:
        """|r| at every node of the one-particle grid."""
        axes = np.meshgrid(*([self.x] * self.d), indexing="ij")
        return np.sqrt(sum(a * a for a in axes))

    def refined(self) -> "Grid":
        """Same box, spacing halved."""
        return Grid(self.d, self.L, 2 * self.n - 1)


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Real samples on the N-fold tensor power of a one-particle grid."""

    grid: Grid
    values: np.ndarray
    particles: int = 1
    normalized: bool = False

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64)
        if vals.shape != self.grid.shape(self.particles):
            raise GridMismatchError(
                f"values shape {vals.shape} does not match grid {self.grid.shape(self.particles)}")
        if not np.all(np.isfinite(vals)):
            raise DomainError("grid function has non-finite values")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)
        if self.normalized:
            norm = grid_integrate_array(vals * vals, self.grid)
            if abs(norm - 1.0) > 1e-10:
                raise DomainError(f"flagged normalized but integral of f^2 is {norm!r}")

    @property
    def ndim(self) -> int:
        return self.grid.d * self.particles

    def density(self) -> "GridFunction":
        """|f|^2 as an unflagged grid function."""
        return GridFunction(self.grid, self.values ** 2, self.particles)


@dataclass(frozen=True, eq=False)
class VectorField:
    """A d*N-component field; components[k] is the k-th coordinate direction."""

    grid: Grid
    components: np.ndarray
    particles: int = 1

    def __post_init__(self):
        comps = np.asarray(self.components, dtype=np.float64)
        expect = (self.grid.d * self.particles,) + self.grid.shape(self.particles)
        if comps.shape != expect:
            raise GridMismatchError(f"components shape {comps.shape}, expected {expect}")
        comps.flags.writeable = False
        object.__setattr__(self, "components", comps)


# ------------------------------------------------------------------- quadrature

def grid_integrate_array(values: np.ndarray, grid: Grid) -> float:
    """Tensor trapezoid rule, contracting the last axis first.

    Every reduction is a numpy pairwise sum over a fixed axis order, so the
    result does not depend on thread count or call history.
    """
    w = grid.weights
    acc = np.asarray(values, dtype=np.float64)
    while acc.ndim:
        acc = np.sum(acc * w, axis=-1)
    return float(acc)


def _check_same(f: GridFunction, g: GridFunction):
    if f.grid != g.grid or f.particles != g.particles:
        raise GridMismatchError("grid functions live on different grids")


def grid_integrate(f: GridFunction) -> float:
    return grid_integrate_array(f.values, f.grid)


def grid_inner(f: GridFunction, g: GridFunction) -> float:
    _check_same(f, g)
    return grid_integrate_array(f.values * g.values, f.grid)


def integrate_out(values: np.ndarray, grid: Grid, keep: int) -> np.ndarray:
    """Trapezoid-integrate away every axis after the first ``keep`` axes."""
    w = grid.weights
    acc = np.asarray(values, dtype=np.float64)
    while acc.ndim > keep:
        acc = np.sum(acc * w, axis=-1)
    return acc


# ------------------------------------------------------------ finite differences

_LAPLACE = {
    2: np.array([-1.0, 2.0, -1.0]),
    4: np.array([1.0, -16.0, 30.0, -16.0, 1.0]) / 12.0,
}


def negative_laplacian(values: np.ndarray, h: float, order: int = 4,
                       out: np.ndarray | None = None,
                       tmp: np.ndarray | None = None) -> np.ndarray:
    """-Laplacian with homogeneous Dirichlet data on the box faces.

    Face nodes are treated as fixed zeros and ghost nodes beyond the box are
    zero, so the discrete operator is symmetric positive definite on the
    interior nodes. The result is zero on the faces.
    """
    if order not in _LAPLACE:
        raise DomainError(f"stencil order must be 2 or 4, got {order}")
    stencil = _LAPLACE[order] / (h * h)
    if out is None:
        out = np.zeros_like(values)
    else:
        out[...] = 0.0
    if tmp is None:
        tmp = np.empty_like(values)
    for axis in range(values.ndim):
        correlate1d(values, stencil, axis=axis, output=tmp, mode="constant", cval=0.0)
        out += tmp
    zero_faces(out)
    return out


def zero_faces(values: np.ndarray) -> np.ndarray:
    for axis in range(values.ndim):
        idx = [slice(None)] * values.ndim
        idx[axis] = 0
        values[tuple(idx)] = 0.0
        idx[axis] = -1
        values[tuple(idx)] = 0.0
    return values


def laplacian_bound(h: float, ndim: int, order: int = 4) -> float:
    """Upper bound on the spectrum of negative_laplacian."""
    per_axis = 4.0 / h**2 if order == 2 else 16.0 / (3.0 * h**2)
    return ndim * per_axis


def gradient(values: np.ndarray, h: float, axis: int, order: int = 2) -> np.ndarray:
    """Central differences; one-sided second-order differences at the faces."""
    g = np.gradient(values, h, axis=axis, edge_order=2)
    if order == 2:
        return g
    if order != 4:
        raise DomainError(f"gradient order must be 2 or 4, got {order}")
    n = values.shape[axis]

    def sl(a, b):
        idx = [slice(None)] * values.ndim
        idx[axis] = slice(a, b)
        return tuple(idx)

    g[sl(2, n - 2)] = (values[sl(0, n - 4)] - 8.0 * values[sl(1, n - 3)]
                       + 8.0 * values[sl(3, n - 1)] - values[sl(4, n)]) / (12.0 * h)
    return g


# ------------------------------------------------------------------- potentials

class TrapPotential:
    """Confining one-body potential V(|r|) >= 0."""

    KINDS = ("harmonic", "quartic", "tabulated")

    def __init__(self, kind: str, params: Sequence[float]):
        if kind not in self.KINDS:
            raise DomainError(f"unknown trap kind {kind!r}")
        self.kind = kind
        self.params = tuple(float(p) for p in params)
        if kind in ("harmonic", "quartic"):
            if len(self.params) != 1 or self.params[0] <= 0:
                raise DomainError(f"{kind} trap needs one positive strength")
        else:
            if len(self.params) < 4 or len(self.params) % 2:
                raise DomainError("tabulated trap needs pairs r0 V0 r1 V1 ...")
            r = np.array(self.params[0::2])
            v = np.array(self.params[1::2])
            if np.any(np.diff(r) <= 0) or np.any(v < 0):
                raise DomainError("tabulated trap needs increasing radii and V >= 0")
            if v[-1] <= v[-2]:
                raise DomainError("tabulated trap must increase at its last knot")
            self._r, self._v = r, v

    @classmethod
    def harmonic(cls, strength: float = 1.0) -> "TrapPotential":
        return cls("harmonic", [strength])

    def __call__(self, r):
        r = np.abs(np.asarray(r, dtype=np.float64))
        if self.kind == "harmonic":
            return self.params[0] * r * r
        if self.kind == "quartic":
            return self.params[0] * r**4
        slope = (self._v[-1] - self._v[-2]) / (self._r[-1] - self._r[-2])
        inside = np.interp(r, self._r, self._v)
        return np.where(r > self._r[-1], self._v[-1] + slope * (r - self._r[-1]), inside)

    def on_grid(self, grid: Grid) -> np.ndarray:
        return self(grid.radius())

    def width(self) -> float:
        """Length scale of the one-body ground state, used for initial guesses."""
        if self.kind == "harmonic":
            return self.params[0] ** -0.25
        if self.kind == "quartic":
            return self.params[0] ** (-1.0 / 6.0)
        return 1.0

    def describe(self) -> dict:
        return {"kind": self.kind, "params": list(self.params)}


_SPHERE_AREA = {1: 2.0, 2: 2.0 * math.pi, 3: 4.0 * math.pi}


def _bump(s):
    s = np.asarray(s, dtype=np.float64)
    out = np.zeros_like(s)
    m = s < 1.0
    out[m] = np.exp(1.0 - 1.0 / (1.0 - s[m] ** 2))
    return out


class PairPotential:
    """Radial, non-negative, compactly supported pair interaction v0(|r|).

    ``coupling`` is the d-dimensional integral of v0.
    """

    PROFILES = ("zero", "indicator", "parabola", "bump", "custom")

    def __init__(self, profile: str, height: float = 0.0, radius: float = 1.0, dim: int = 1,
                 func: Callable | None = None):
        if profile not in self.PROFILES:
            raise DomainError(f"unknown pair profile {profile!r}")
        if dim not in _SPHERE_AREA:
            raise DomainError("pair potential dimension must be 1, 2 or 3")
        if not radius > 0 or not math.isfinite(radius):
            raise DomainError("pair potential needs a finite positive support radius")
        if height < 0:
            raise DomainError("pair potential must be non-negative")
        if profile == "custom" and func is None:
            raise DomainError("custom profile needs a callable")
        self.profile = profile
        self.height = float(height)
        self.radius = float(radius)
        self.dim = dim
        self._func = func
        self._coupling: float | None = None
        if profile == "custom":
            probe = np.linspace(0.0, 1.5 * radius, 301)
            vals = np.asarray(func(probe), dtype=np.float64)
            if np.any(vals < 0) or np.any(vals[probe > radius] != 0):
                raise DomainError("custom profile must be >= 0 and vanish beyond its radius")

    @classmethod
    def zero(cls, dim: int = 1) -> "PairPotential":
        return cls("zero", 0.0, 1.0, dim)

    @classmethod
    def with_coupling(cls, profile: str, coupling: float, radius: float, dim: int = 1):
        """Profile scaled so that its integral equals ``coupling``."""
        unit = cls(profile, 1.0, radius, dim)
        return cls(profile, coupling / unit.coupling, radius, dim)

    @property
    def support_radius(self) -> float:
        return self.radius

    def __call__(self, r):
        r = np.abs(np.asarray(r, dtype=np.float64))
        s = r / self.radius
        if self.profile == "zero":
            return np.zeros_like(r)
        if self.profile == "indicator":
            return np.where(s <= 1.0, self.height, 0.0)
        if self.profile == "parabola":
            return self.height * np.clip(1.0 - s * s, 0.0, None)
        if self.profile == "bump":
            return self.height * _bump(s)
        return np.asarray(self._func(r), dtype=np.float64)

    @property
    def coupling(self) -> float:
        if self._coupling is None:
            self._coupling = pair_coupling(self)
        return self._coupling

    def describe(self) -> dict:
        if self.profile == "custom":
            raise DomainError("custom profiles cannot be serialized")
        return {"profile": self.profile, "height": self.height, "radius": self.radius,
                "dim": self.dim}


def radial_integral(f: Callable, radius: float, dim: int, rtol: float = 1e-11,
                    max_doublings: int = 20) -> float:
    """S_{d-1} * int_0^R f(r) r^(d-1) dr, midpoint rule with one Richardson step.

    Midpoints never touch r = R, where compact profiles may jump and a rounded
    support radius can land on either side of the edge.
    """
    n = 64
    prev = prev_mid = None
    for _ in range(max_doublings):
        r = (np.arange(n) + 0.5) * (radius / n)
        mid = _SPHERE_AREA[dim] * (radius / n) * float(np.sum(np.asarray(f(r), dtype=np.float64)
                                                            * r ** (dim - 1)))
        if prev_mid is not None:
            val = (4.0 * mid - prev_mid) / 3.0
            if prev is not None and abs(val - prev) <= rtol * max(abs(val), 1e-300):
                return float(val)
            if prev is not None and val == 0.0 and prev == 0.0:
                return 0.0
            prev = val
        prev_mid = mid
        n *= 2
    raise RuntimeError("radial quadrature did not converge")


def pair_coupling(v0: PairPotential) -> float:
    """g = integral of v0 over R^d."""
    if v0.profile == "zero" or (v0.height == 0.0 and v0.profile != "custom"):
        return 0.0
    return radial_integral(v0, v0.radius, v0.dim)


class ScaledPairPotential:
    """v_N(r) = N^(d beta) / (N - 1) * v0(N^beta r)."""

    def __init__(self, base: PairPotential, N: int, beta: float):
        if int(N) != N or N < 2:
            raise DomainError(f"scaled interaction needs N >= 2, got {N}")
        if not 0.0 <= beta < 1.0:
            raise DomainError(f"beta must lie in [0, 1), got {beta}")
        self.base = base
        self.N = int(N)
        self.beta = float(beta)
        self.prefactor = self.N ** (base.dim * self.beta) / (self.N - 1)
        self.stretch = self.N ** self.beta

    def __call__(self, r):
        return self.prefactor * self.base(self.stretch * np.asarray(r, dtype=np.float64))

    @property
    def support_radius(self) -> float:
        return self.base.radius / self.stretch

    @property
    def coupling(self) -> float:
        """Exact value of the integral of v_N: g / (N - 1)."""
        return self.base.coupling / (self.N - 1)


def scale_pair_potential(v0: PairPotential, N: int, beta: float) -> ScaledPairPotential:
    return ScaledPairPotential(v0, N, beta)


# ----------------------------------------------------------------------- drifts

def default_floor(rho: np.ndarray) -> float:
    return 1e-30 * float(np.max(rho))


def drift_from_density(rho: GridFunction, floor: float | None = None,
                       order: int = 2) -> VectorField:
    """Osmotic drift grad(rho) / (2 rho) as half the gradient of log max(rho, floor).

    Where rho falls below the floor the drift is set to zero.
    """
    values = rho.values
    if np.any(values < 0):
        raise DomainError("density must be non-negative")
    if floor is None:
        floor = default_floor(values)
    if not floor > 0:
        raise DomainError(f"density floor must be positive, got {floor}")
    logr = np.log(np.maximum(values, floor))
    h = rho.grid.h
    comps = np.empty((values.ndim,) + values.shape)
    dead = values < floor
    for axis in range(values.ndim):
        comps[axis] = 0.5 * gradient(logr, h, axis, order)
        comps[axis][dead] = 0.0
    return VectorField(rho.grid, comps, rho.particles)


def gaussian_state(grid: Grid, width: float, particles: int = 1) -> np.ndarray:
    """Normalized product Gaussian, zero on the box faces."""
    x = grid.x
    one = np.exp(-0.5 * (x / width) ** 2)
    one[0] = one[-1] = 0.0
    psi = one
    for _ in range(grid.d * particles - 1):
        psi = np.multiply.outer(psi, one)
    return psi / math.sqrt(grid_integrate_array(psi * psi, grid))


def tensor_power(values: np.ndarray, k: int) -> np.ndarray:
    out = values
    for _ in range(k - 1):
        out = np.multiply.outer(out, values)
    return out


__all__ = [
    "CONVENTION", "DomainError", "Grid", "GridFunction", "GridMismatchError", "PairPotential",
    "PhysicalConvention", "ScaledPairPotential", "TrapPotential", "VectorField",
    "default_floor", "drift_from_density", "gaussian_state", "gradient", "grid_inner",
    "grid_integrate", "grid_integrate_array", "integrate_out", "laplacian_bound",
    "negative_laplacian", "pair_coupling", "radial_integral", "scale_pair_potential",
    "tensor_power", "zero_faces",
]
