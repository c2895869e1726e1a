"""Euler-Maruyama simulation of Nelson diffusions dX = b(X) dt + dW in a box.

Drifts are evaluated by multilinear interpolation of grid fields. Particles
leaving [-L, L] are reflected back. All randomness comes from per-trajectory
streams (:mod:`beclab.rng`), so trajectory j depends only on (seed, j).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .core import DomainError, Grid, GridFunction
from .rng import TAG_INCREMENTS, TAG_SAMPLING, StreamBank, check_seed

Drift = Callable[[np.ndarray], np.ndarray]

STEP_CHUNK = 256
REJECTION_BATCH = 64


class SimulationError(ArithmeticError):
    def __init__(self, trajectory: int, step: int):
        super().__init__(f"non-finite state in trajectory {trajectory} at step {step}")
        self.trajectory = trajectory
        self.step = step


@dataclass(frozen=True)
class SdeParams:
    dt: float
    T: float
    M: int
    seed: int
    records: int = 100

    def __post_init__(self):
        if not self.dt > 0:
            raise DomainError("dt must be positive")
        if not self.T >= self.dt:
            raise DomainError("horizon must be at least one step")
        if self.M < 1 or self.records < 1:
            raise DomainError("need at least one trajectory and one record")
        check_seed(self.seed)

    @property
    def steps(self) -> int:
        return int(round(self.T / self.dt))

    def record_steps(self) -> np.ndarray:
        return np.unique(np.rint(np.linspace(0, self.steps, self.records + 1)).astype(np.int64))

    def describe(self) -> dict:
        return {"dt": self.dt, "T": self.T, "M": self.M, "seed": self.seed,
                "records": self.records}


@dataclass(frozen=True, eq=False)
class PathEnsemble:
    params: SdeParams
    dims: int
    steps: np.ndarray       # recorded step indices
    states: np.ndarray      # (M, records, dims)
    trajectories: np.ndarray

    @property
    def times(self) -> np.ndarray:
        return self.steps * self.params.dt

    @property
    def final(self) -> np.ndarray:
        return self.states[:, -1, :]

    @property
    def provenance(self) -> dict:
        return {"seed": self.params.seed, "stream_tag": TAG_INCREMENTS,
                "trajectories": [int(self.trajectories[0]), int(self.trajectories[-1])]}


# -- drifts -----------------------------------------------------------------

def _interpolator(grid: Grid, values: np.ndarray) -> RegularGridInterpolator:
    axes = (grid.x,) * values.ndim
    return RegularGridInterpolator(axes, values, method="linear", bounds_error=False,
                                   fill_value=None)


class FieldDrift:
    """Drift with one tabulated component per coordinate."""

    def __init__(self, grid: Grid, components: Sequence[np.ndarray]):
        self.grid = grid
        self.box = grid.L
        self._interp = [_interpolator(grid, np.asarray(c)) for c in components]

    def __call__(self, X: np.ndarray) -> np.ndarray:
        return np.stack([f(X) for f in self._interp], axis=1)


class SymmetricDrift:
    """N-body drift of a symmetric density from its first block b_1 only.

    b_i(x) = b_1(x with coordinates 1 and i exchanged).
    """

    def __init__(self, grid: Grid, b1: np.ndarray):
        if grid.d != 1:
            raise DomainError("symmetric drifts are tabulated for d = 1")
        self.grid = grid
        self.box = grid.L
        self.N = np.ndim(b1)
        self._interp = _interpolator(grid, np.asarray(b1))

    def __call__(self, X: np.ndarray) -> np.ndarray:
        out = np.empty_like(X)
        for i in range(self.N):
            q = X.copy()
            q[:, [0, i]] = X[:, [i, 0]]
            out[:, i] = self._interp(q)
        return out


class ProductDrift:
    """Independent copies of a one-particle drift u, one per coordinate."""

    def __init__(self, grid: Grid, u: np.ndarray):
        self.grid = grid
        self.box = grid.L
        self._interp = _interpolator(grid, np.asarray(u))

    def __call__(self, X: np.ndarray) -> np.ndarray:
        return self._interp(X.reshape(-1, 1)).reshape(X.shape)


# -- sampling ---------------------------------------------------------------

def _inverse_cdf(x: np.ndarray, rho: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Exact inverse of the piecewise-linear CDF through (x_i, rho_i)."""
    h = x[1] - x[0]
    mass = 0.5 * h * (rho[:-1] + rho[1:])
    cdf = np.concatenate([[0.0], np.cumsum(mass)])
    target = u * cdf[-1]
    k = np.clip(np.searchsorted(cdf, target, side="right") - 1, 0, len(mass) - 1)
    s = target - cdf[k]
    r0 = rho[k]
    slope = (rho[k + 1] - r0) / h
    root = np.sqrt(np.maximum(r0 * r0 + 2.0 * slope * s, 0.0))
    denom = r0 + root
    t = np.divide(2.0 * s, denom, out=np.zeros_like(s), where=denom > 0)
    return x[k] + np.clip(t, 0.0, h)


def sample_density(rho: GridFunction, M: int, seed: int, first: int = 0) -> np.ndarray:
    """M points distributed as rho, one row per trajectory index first..first+M-1."""
    grid = rho.grid
    values = np.asarray(rho.values, dtype=np.float64)
    if np.any(values < 0):
        raise DomainError("density must be non-negative")
    top = float(np.max(values))
    if not top > 0:
        raise DomainError("density vanishes identically")
    bank = StreamBank(seed, range(first, first + M), TAG_SAMPLING)
    D = values.ndim
    if D == 1:
        return _inverse_cdf(grid.x, values, bank.uniforms(1)[:, 0])[:, None]
    interp = _interpolator(grid, values)
    out = np.full((M, D), np.nan)
    pending = np.arange(M)
    while pending.size:
        sub = bank.subset(pending)
        draws = sub.uniforms(REJECTION_BATCH * (D + 1)).reshape(pending.size, REJECTION_BATCH, D + 1)
        cand = -grid.L + 2.0 * grid.L * draws[:, :, :D]
        dens = interp(cand.reshape(-1, D)).reshape(pending.size, REJECTION_BATCH)
        ok = draws[:, :, D] * top < dens
        hit = ok.any(axis=1)
        first_ok = np.argmax(ok, axis=1)
        rows = np.nonzero(hit)[0]
        out[pending[rows]] = cand[rows, first_ok[rows]]
        pending = pending[~hit]
    return out


# -- integration ------------------------------------------------------------

def reflect(X: np.ndarray, L: float) -> np.ndarray:
    y = np.mod(X + L, 4.0 * L)
    y = np.where(y > 2.0 * L, 4.0 * L - y, y)
    return y - L


def _check_finite(X: np.ndarray, trajectories: np.ndarray, step: int):
    bad = ~np.isfinite(X).all(axis=1)
    if bad.any():
        raise SimulationError(int(trajectories[np.argmax(bad)]), step)


def _box_of(drift, box):
    if box is None:
        box = getattr(drift, "box", None)
    return box


def _prepare(init, params):
    X = np.array(init, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[0] != params.M:
        raise DomainError(f"init has {X.shape[0]} rows, params ask for {params.M}")
    return X


def simulate(drift: Drift, init: np.ndarray, params: SdeParams, box: float | None = None,
             first: int = 0) -> PathEnsemble:
    X = _prepare(init, params)
    M, D = X.shape
    box = _box_of(drift, box)
    if box is not None and np.any(np.abs(X) > box):
        raise DomainError("initial points must lie inside the box")
    trajectories = np.arange(first, first + M)
    bank = StreamBank(params.seed, trajectories, TAG_INCREMENTS)
    record = params.record_steps()
    states = np.empty((M, record.size, D))
    slot = 0
    if record[0] == 0:
        states[:, 0] = X
        slot = 1
    dt, sq = params.dt, math.sqrt(params.dt)
    step = 0
    while step < params.steps:
        chunk = min(STEP_CHUNK, params.steps - step)
        noise = bank.normals(chunk * D).reshape(M, chunk, D)
        for c in range(chunk):
            X = X + dt * drift(X) + sq * noise[:, c]
            if box is not None:
                X = reflect(X, box)
            step += 1
            _check_finite(X, trajectories, step)
            if slot < record.size and record[slot] == step:
                states[:, slot] = X
                slot += 1
    return PathEnsemble(params, D, record, states, trajectories)


@dataclass(frozen=True, eq=False)
class CoupledResult:
    a: PathEnsemble
    b: PathEnsemble
    sup_distance: np.ndarray  # per trajectory, sup over every step of |Y1_a - Y1_b|^2

    @property
    def mean(self) -> float:
        return float(np.mean(self.sup_distance))


def simulate_coupled(drift_a: Drift, drift_b: Drift, init: np.ndarray, params: SdeParams,
                     box: float | None = None, first: int = 0) -> CoupledResult:
    """Both systems driven by the same Brownian increments from the same start."""
    A = _prepare(init, params)
    B = A.copy()
    M, D = A.shape
    box = _box_of(drift_a, box)
    trajectories = np.arange(first, first + M)
    bank = StreamBank(params.seed, trajectories, TAG_INCREMENTS)
    record = params.record_steps()
    sa = np.empty((M, record.size, D))
    sb = np.empty((M, record.size, D))
    slot = 0
    if record[0] == 0:
        sa[:, 0], sb[:, 0] = A, B
        slot = 1
    sup = np.zeros(M)
    dt, sq = params.dt, math.sqrt(params.dt)
    step = 0
    while step < params.steps:
        chunk = min(STEP_CHUNK, params.steps - step)
        noise = bank.normals(chunk * D).reshape(M, chunk, D)
        for c in range(chunk):
            dw = sq * noise[:, c]
            A = A + dt * drift_a(A) + dw
            B = B + dt * drift_b(B) + dw
            if box is not None:
                A, B = reflect(A, box), reflect(B, box)
            step += 1
            _check_finite(A, trajectories, step)
            _check_finite(B, trajectories, step)
            np.maximum(sup, (A[:, 0] - B[:, 0]) ** 2, out=sup)
            if slot < record.size and record[slot] == step:
                sa[:, slot], sb[:, slot] = A, B
                slot += 1
    return CoupledResult(PathEnsemble(params, D, record, sa, trajectories),
                         PathEnsemble(params, D, record, sb, trajectories), sup)


# -- diagnostics ------------------------------------------------------------

def histogram_density(samples: np.ndarray, grid: Grid) -> GridFunction:
    """Nearest-node histogram, normalized under the trapezoid weights."""
    samples = np.asarray(samples, dtype=np.float64).ravel()
    if samples.size == 0:
        raise DomainError("no samples to histogram")
    idx = np.clip(np.rint((samples + grid.L) / grid.h).astype(np.int64), 0, grid.n - 1)
    counts = np.bincount(idx, minlength=grid.n).astype(np.float64)
    return GridFunction(grid, counts / (samples.size * grid.weights), 1)


def empirical_density(ensemble: PathEnsemble, block: int, window: tuple[float, float],
                      grid: Grid) -> GridFunction:
    t0, t1 = window
    if not 0 <= block < ensemble.dims:
        raise DomainError("coordinate block out of range")
    if t0 > t1 or t1 > ensemble.times[-1] + 1e-12 * max(1.0, ensemble.times[-1]):
        raise DomainError("time window outside the horizon")
    sel = (ensemble.times >= t0 - 1e-12) & (ensemble.times <= t1 + 1e-12)
    if not sel.any():
        raise DomainError("time window holds no recorded times")
    return histogram_density(ensemble.states[:, sel, block], grid)


def write_ensemble_csv(ensemble: PathEnsemble, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(["trajectory", "step", "time"] + [f"x{k}" for k in range(ensemble.dims)])
        for j, traj in enumerate(ensemble.trajectories):
            for r, s in enumerate(ensemble.steps):
                w.writerow([int(traj), int(s), format(float(s * ensemble.params.dt), ".17g")]
                           + [format(float(v), ".17g") for v in ensemble.states[j, r]])
