"""Cached solves and per-cell chaos computations shared by the CLI and scripts."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cache import CorruptCacheError, cache_key, cache_load, cache_store, potential_hash
from .chaos import ChaosReport, build_report, kac_bound, kac_chaos_metric
from .config import RunConfig
from .core import GridFunction, drift_from_density
from .gp import NlsSolution, evaluate_nls, minimize_nls
from .nbody import (BudgetError, NBodyState, evaluate_nbody, minimize_nbody,
                    nbody_drift_component, product_state)
from .nelson import ProductDrift, SdeParams, SymmetricDrift, sample_density, simulate_coupled


@dataclass
class CellResult:
    report: ChaosReport
    diagnostics: dict
    kac_bound: float

    @property
    def kac_ok(self) -> bool:
        return self.report.kacMetric <= self.kac_bound


class Session:
    """One configuration plus cache settings; memoizes solves within a run."""

    def __init__(self, cfg: RunConfig, use_cache: bool = True, cache_root: str | None = None,
                 seed: int | None = None):
        self.cfg = cfg
        self.use_cache = use_cache
        self.cache_root = cache_root
        self.seed = cfg.sde.seed if seed is None else seed
        self.grid = cfg.model.grid()
        self.V = cfg.potentials.trap_potential()
        self.v0 = cfg.potentials.pair_potential(self.grid.d)
        self.g_nls = cfg.potentials.nls_g()
        self.flow = cfg.solver.flow()
        self._memo: dict = {}

    # -- cache plumbing
    def _potentials(self, kind: str) -> dict:
        desc = self.cfg.potentials.describe()
        desc["model"] = kind
        return desc

    def _solver_desc(self) -> dict:
        return self.flow.describe()

    def _lookup(self, key: str):
        if not self.use_cache:
            return None
        try:
            return cache_load(key, self.cache_root)
        except CorruptCacheError:
            return None  # entry was removed; recompute

    def _store(self, key: str, f: GridFunction, beta: float, kind: str):
        if self.use_cache:
            cache_store(key, f, beta, potential_hash(self._potentials(kind)), self.cache_root)

    # -- solves
    def nls(self) -> NlsSolution:
        if "nls" in self._memo:
            return self._memo["nls"]
        key = cache_key(self.grid, 1, 0.0, self._potentials("nls"), self._solver_desc())
        hit = self._lookup(key)
        vvals = self.V.on_grid(self.grid)
        if hit is not None:
            sol = evaluate_nls(np.array(hit.values), self.grid, vvals, self.g_nls,
                               self.flow.stencil_order)
        else:
            sol = minimize_nls(self.V, self.g_nls, self.grid, self.flow)
            self._store(key, sol.phi, 0.0, "nls")
        self._memo["nls"] = sol
        return sol

    def nbody(self, N: int, beta: float) -> NBodyState:
        tag = ("nbody", N, float(beta))
        if tag in self._memo:
            return self._memo[tag]
        size = self.grid.n ** (self.grid.d * N)
        if size > self.cfg.solver.budget:
            raise BudgetError(size, self.cfg.solver.budget)
        key = cache_key(self.grid, N, float(beta), self._potentials("nbody"), self._solver_desc())
        hit = self._lookup(key)
        if hit is not None:
            state = evaluate_nbody(np.array(hit.values), self.V, self.v0, N, beta, self.grid,
                                   self.flow.stencil_order)
        else:
            init = product_state(self.nls().phi, N)
            state = minimize_nbody(self.V, self.v0, N, beta, self.grid, self.flow, init=init,
                                   budget=self.cfg.solver.budget)
            self._store(key, state.psi, float(beta), "nbody")
        self._memo[tag] = state
        return state

    # -- simulation and reports
    def sde_params(self, T: float | None = None, M: int | None = None) -> SdeParams:
        s = self.cfg.sde
        return SdeParams(s.dt, s.T if T is None else T, s.M if M is None else M, self.seed,
                         s.records)

    def coupled(self, state: NBodyState, T: float, M: int | None = None):
        nls = self.nls()
        params = self.sde_params(T, M)
        init = sample_density(GridFunction(self.grid, state.density(), state.N), params.M,
                              self.seed)
        drift_a = SymmetricDrift(self.grid, nbody_drift_component(state).values)
        u = drift_from_density(GridFunction(self.grid, nls.phi.values ** 2)).components[0]
        return simulate_coupled(drift_a, ProductDrift(self.grid, u), init, params)

    def chaos_cell(self, N: int, beta: float, t: float | None = None,
                   M: int | None = None) -> CellResult:
        t = self.cfg.sweep.t if t is None else t
        state = self.nbody(N, beta)
        nls = self.nls()
        kac = kac_chaos_metric(self.coupled(state, t, M)) if t > 0 else 0.0
        report, diag = build_report(state, nls, self.V, t, kac)
        return CellResult(report, diag, kac_bound(t, report.driftMismatch))


def ensure_dir(path: str | Path) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path
