"""Relative entropy, total variation and Fisher information diagnostics.

Grid densities are compared as probability vectors p_i = w_i rho_i with the
tensor trapezoid weights w. Marginals by quadrature are then exactly the
discrete marginals of p, so chain-rule, Pinsker and super-additivity
statements hold on the grid without discretization slack.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .core import (DomainError, Grid, GridFunction, GridMismatchError, TrapPotential,
                   default_floor, drift_from_density, gradient, integrate_out,
                   negative_laplacian, tensor_power)
from .gp import NlsSolution
from .nbody import NBodyState, log_gradient, marginal_density

KL_FLOOR = 1e-30


# -- discrete divergences ---------------------------------------------------

def _prob(P) -> np.ndarray:
    P = np.asarray(P, dtype=np.float64)
    if np.any(P < 0) or abs(float(np.sum(P)) - 1.0) > 1e-12:
        raise DomainError("not a probability vector")
    return P


def _kl_terms(P: np.ndarray, Q: np.ndarray) -> float:
    live = P >= KL_FLOOR
    if np.any(Q[live] <= 0):
        return math.inf
    p = P[live]
    return float(np.sum(p * np.log(p / Q[live])))


def kl_discrete(P, Q) -> float:
    """sum P ln(P / Q); +inf when P is not absolutely continuous w.r.t. Q."""
    return max(_kl_terms(_prob(P), _prob(Q)), 0.0)


def absolutely_continuous(P, Q) -> bool:
    P, Q = np.asarray(P), np.asarray(Q)
    return bool(np.all(Q[P >= KL_FLOOR] > 0))


def tv_discrete(P, Q) -> float:
    return 0.5 * float(np.sum(np.abs(_prob(P) - _prob(Q))))


def pinsker_check(P, Q) -> dict:
    tv = tv_discrete(P, Q)
    kl = kl_discrete(P, Q)
    bound = math.sqrt(2.0 * kl)
    stronger = math.sqrt(kl / 2.0)
    return {"tv": tv, "kl": kl, "bound": bound, "stronger_bound": stronger,
            "violations": int(tv > bound + 1e-12), "stronger_holds": tv <= stronger + 1e-12}


def chain_rule_gap(P, Q1, Q2) -> float:
    """H(P | Q1 x Q2) - H(P1 | Q1) - H(P2 | Q2) for P on a product alphabet."""
    P = _prob(P)
    if P.ndim != 2:
        raise DomainError("P must be a matrix over the product alphabet")
    Q1, Q2 = _prob(Q1), _prob(Q2)
    joint = kl_discrete(P, np.outer(Q1, Q2))
    return joint - kl_discrete(P.sum(axis=1), Q1) - kl_discrete(P.sum(axis=0), Q2)


# -- grid densities ---------------------------------------------------------

def _weights(grid: Grid, ndim: int) -> np.ndarray:
    w = grid.weights
    out = np.ones((1,) * ndim)
    for axis in range(ndim):
        shape = [1] * ndim
        shape[axis] = -1
        out = out * w.reshape(shape)
    return out


def _check_grids(a: GridFunction, b: GridFunction):
    if a.grid != b.grid or a.values.shape != b.values.shape:
        raise GridMismatchError("densities live on different grids")


def grid_kl(rho_a: GridFunction, rho_b: GridFunction) -> float:
    """KL of the quadrature probability vectors of two densities."""
    _check_grids(rho_a, rho_b)
    w = _weights(rho_a.grid, rho_a.values.ndim)
    P = w * rho_a.values
    Q = w * rho_b.values
    P, Q = P / np.sum(P), Q / np.sum(Q)
    return max(_kl_terms(P, Q), 0.0)


def tv_density(rho_a: GridFunction, rho_b: GridFunction) -> float:
    _check_grids(rho_a, rho_b)
    w = _weights(rho_a.grid, rho_a.values.ndim)
    return 0.5 * float(np.sum(w * np.abs(rho_a.values - rho_b.values)))


# -- drifts and entropies ---------------------------------------------------

def _nls_density(nls: NlsSolution, state: NBodyState) -> np.ndarray:
    if nls.phi.grid != state.grid:
        raise GridMismatchError("N-body state and nlS solution use different grids")
    return nls.phi.values ** 2


def drift_mismatch(state: NBodyState, nls: NlsSolution, order: int = 2) -> float:
    """E_{rho_N} |b_1 - u_nls(r_1)|^2 by quadrature on the tensor grid."""
    rho1 = _nls_density(nls, state)
    rho = state.density()
    b1 = log_gradient(rho, state.grid.h, 0, order=order)
    u = drift_from_density(GridFunction(state.grid, rho1), order=order).components[0]
    diff = b1 - u.reshape((-1,) + (1,) * (state.N - 1))
    return state.grid.h ** state.N * float(np.sum(diff * diff * rho))


def identity_terms(state: NBodyState, nls: NlsSolution, V: TrapPotential,
                   order: int = 4) -> dict:
    """The pieces of  mismatch = K - mu + int V(r_1) rho_N + 2 g int phi^2(r_1) rho_N."""
    grid, N = state.grid, state.N
    rho1 = _nls_density(nls, state)
    rho = state.density()
    cell = grid.h ** N
    col = (-1,) + (1,) * (N - 1)
    trap = cell * float(np.sum(V.on_grid(grid).reshape(col) * rho))
    overlap = 2.0 * nls.coupling * cell * float(np.sum(rho1.reshape(col) * rho))
    kin1 = state.kinetic  # int |grad_1 Psi|^2, equal for every coordinate by symmetry
    return {"grad1": kin1, "trap": trap, "overlap": overlap, "mu": nls.mu,
            "full": N * kin1}


IDENTITY_READINGS = ("grad1", "grad1_half", "full_half")


def entropy_identity_check(state: NBodyState, nls: NlsSolution, V: TrapPotential,
                           mismatch: float | None = None) -> dict:
    """Gap between the mismatch and its closed form under each kinetic reading.

    grad1:      int |grad_1 Psi|^2
    grad1_half: int |grad_1 Psi|^2 / 2
    full_half:  int |grad Psi|^2 / 2 (all coordinates)
    The reported gap is the smallest; ``reading`` names the one that achieves it.
    """
    if mismatch is None:
        mismatch = drift_mismatch(state, nls)
    t = identity_terms(state, nls, V)
    rest = -t["mu"] + t["trap"] + t["overlap"]
    rhs = {"grad1": t["grad1"] + rest, "grad1_half": 0.5 * t["grad1"] + rest,
           "full_half": 0.5 * t["full"] + rest}
    gaps = {k: abs(v - mismatch) for k, v in rhs.items()}
    best = min(IDENTITY_READINGS, key=lambda k: gaps[k])
    return {"mismatch": mismatch, "rhs": rhs, "gaps": gaps, "reading": best,
            "gap": gaps[best]}


def one_particle_entropy(t: float, mismatch: float) -> float:
    if t < 0:
        raise DomainError("time must be non-negative")
    return 0.5 * t * mismatch


def _product_density(nls: NlsSolution, k: int) -> GridFunction:
    return GridFunction(nls.phi.grid, tensor_power(nls.phi.values ** 2, k), k)


def k_marginal_entropy(state: NBodyState, nls: NlsSolution, k: int) -> dict:
    """Grid KL of rho^(k) against rho_nls^{x k}, with the chain-rule bound."""
    _nls_density(nls, state)
    if not 1 <= k < state.N:
        raise DomainError("need 1 <= k < N")
    marg = marginal_density(state, k)
    kl = grid_kl(marg, _product_density(nls, k))
    full = grid_kl(GridFunction(state.grid, state.density(), state.N),
                   _product_density(nls, state.N))
    return {"kl": kl, "full": full, "bound": full / (state.N // k),
            "tv": tv_density(marg, _product_density(nls, k))}


# -- Fisher information -----------------------------------------------------

def fisher_information(rho: GridFunction, order: int = 4, floor: float | None = None) -> dict:
    """I_n = int |grad rho|^2 / rho, and I_n / n."""
    values = np.asarray(rho.values, dtype=np.float64)
    if floor is None:
        floor = default_floor(values)
    h = rho.grid.h
    live = values >= floor
    safe = np.where(live, values, 1.0)
    total = 0.0
    w = _weights(rho.grid, values.ndim)
    for axis in range(values.ndim):
        g = gradient(values, h, axis, order)
        total += float(np.sum(np.where(live, w * g * g / safe, 0.0)))
    n = rho.particles
    return {"I": total, "normalized": total / n}


def _fisher_raw(values: np.ndarray, grid: Grid, axes, order: int) -> float:
    w = _weights(grid, values.ndim)
    total = 0.0
    for axis in axes:
        g = gradient(values, grid.h, axis, order)
        total += float(np.sum(w * g * g / values))
    return total


def fisher_superadditivity_gap(G: GridFunction, l: int, order: int = 2) -> float:
    """I_n(G) - I_l(G_l) - I_{n-l}(G_{n-l}) for a strictly positive density.

    Only derivatives along the tensor axes enter, and quadrature marginals
    commute with them, so the gap is non-negative on the grid by weighted
    Cauchy-Schwarz.
    """
    values = np.asarray(G.values, dtype=np.float64)
    n = values.ndim
    if not 1 <= l < n:
        raise DomainError("need 1 <= l < n")
    if np.any(values <= 0):
        raise DomainError("density must be strictly positive")
    grid = G.grid
    head = integrate_out(values, grid, l)
    tail = np.moveaxis(values, tuple(range(l, n)), tuple(range(n - l)))
    tail = integrate_out(tail, grid, n - l)
    return (_fisher_raw(values, grid, range(n), order) - _fisher_raw(head, grid, range(l), order)
            - _fisher_raw(tail, grid, range(n - l), order))


def fisher_convexity_check(G1: GridFunction, G2: GridFunction, alpha: float,
                           order: int = 2) -> float:
    """alpha I(G1) + (1 - alpha) I(G2) - I(mixture)."""
    if not 0 <= alpha <= 1:
        raise DomainError("alpha must lie in [0, 1]")
    a, b = np.asarray(G1.values), np.asarray(G2.values)
    if np.any(a <= 0) or np.any(b <= 0):
        raise DomainError("densities must be strictly positive")
    grid, axes = G1.grid, range(a.ndim)
    mix = alpha * a + (1.0 - alpha) * b
    return (alpha * _fisher_raw(a, grid, axes, order) + (1 - alpha) * _fisher_raw(b, grid, axes, order)
            - _fisher_raw(mix, grid, axes, order))


# -- path-space chaos -------------------------------------------------------

def kac_chaos_metric(coupled) -> float:
    return coupled.mean


def kac_bound(T: float, mismatch: float, slack: float = 1.25) -> float:
    return T * T * mismatch * slack


# -- report -----------------------------------------------------------------

@dataclass
class ChaosReport:
    N: int
    beta: float
    t: float
    driftMismatch: float
    normalizedEntropy: float
    kMarginalEntropy: list = field(default_factory=list)
    kMarginalTV: list = field(default_factory=list)
    fisherNormalized: float = math.nan
    kacMetric: float = math.nan
    identityGap: float = math.nan

    FIELDS = ("N", "beta", "t", "driftMismatch", "normalizedEntropy", "kMarginalEntropy",
              "kMarginalTV", "fisherNormalized", "kacMetric", "identityGap")

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.FIELDS}

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, ensure_ascii=False, allow_nan=True)

    def csv_row(self) -> list[str]:
        out = []
        for k in self.FIELDS:
            v = getattr(self, k)
            if isinstance(v, list):
                out.append(";".join(format(float(x), ".17g") for x in v))
            elif isinstance(v, int):
                out.append(str(v))
            else:
                out.append(format(float(v), ".17g"))
        return out

    def check(self) -> list[str]:
        """Invariants of a single report; returns the names of violated ones."""
        bad = []
        if abs(self.normalizedEntropy - 0.5 * self.t * self.driftMismatch) > 0.0:
            bad.append("entropy-definition")
        for tv, kl in zip(self.kMarginalTV, self.kMarginalEntropy):
            if tv > math.sqrt(2.0 * kl) + 1e-12:
                bad.append("pinsker")
        return bad


def build_report(state: NBodyState, nls: NlsSolution, V: TrapPotential, t: float,
                 kac: float = math.nan) -> tuple[ChaosReport, dict]:
    """ChaosReport plus a diagnostics dict (identity readings, Fisher forms)."""
    mismatch = drift_mismatch(state, nls)
    ident = entropy_identity_check(state, nls, V, mismatch)
    kl, tv, bounds = [], [], []
    for k in range(1, state.N):
        km = k_marginal_entropy(state, nls, k)
        kl.append(km["kl"])
        tv.append(km["tv"])
        bounds.append(km["bound"])
    fisher = fisher_information(GridFunction(state.grid, state.density(), state.N))
    report = ChaosReport(state.N, state.beta, t, mismatch, one_particle_entropy(t, mismatch),
                         kl, tv, fisher["normalized"], kac, ident["gap"])
    diagnostics = {
        "identityReading": ident["reading"],
        "identityGaps": ident["gaps"],
        "kMarginalBound": bounds,
        "fisherKineticForm": state.kinetic,  # int |grad_1 Psi|^2, without the factor 4
        "fisherFourKinetic": 4.0 * state.kinetic,
    }
    return report, diagnostics
