"""Property suite behind ``beclab verify``.

Each check returns a PropertyResult; nothing here raises on a violated
property, so one run reports every failure at once.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .chaos import (chain_rule_gap, fisher_convexity_check, fisher_information,
                    fisher_superadditivity_gap, kl_discrete, pinsker_check, tv_density)
from .core import (Grid, GridFunction, PairPotential, TrapPotential, drift_from_density,
                   grid_integrate_array, radial_integral, scale_pair_potential)
from .flow import FlowParams
from .gp import minimize_nls, perturbed_nls_energy
from .nbody import marginal_density, minimize_nbody, nbody_drift_component, product_state
from .nelson import (FieldDrift, SdeParams, SymmetricDrift, empirical_density, sample_density,
                     simulate)


@dataclass
class PropertyResult:
    name: str
    passed: bool
    detail: str

    def as_dict(self) -> dict:
        return {"name": self.name, "passed": bool(self.passed), "detail": self.detail}


def _res(name: str, ok, detail: str) -> PropertyResult:
    return PropertyResult(name, bool(ok), detail)


# -- model-core ---------------------------------------------------------------

def scaling_identity(v0: PairPotential) -> PropertyResult:
    worst = 0.0
    for N in (2, 3, 4, 8):
        for beta in (0.0, 0.25, 0.5, 0.75):
            vN = scale_pair_potential(v0, N, beta)
            got = radial_integral(vN, vN.support_radius, v0.dim)
            worst = max(worst, abs(got / (v0.coupling / (N - 1)) - 1.0))
    return _res("scaling-identity", worst <= 1e-6, f"max relative error {worst:.2e}")


def gradient_refinement() -> PropertyResult:
    errs = []
    for n in (101, 201, 401):
        grid = Grid(1, 1.5, n)
        rho = np.exp(-grid.x ** 4)
        b = drift_from_density(GridFunction(grid, rho)).components[0]
        errs.append(float(np.max(np.abs(b + 2.0 * grid.x ** 3)[1:-1])))
    ratios = [errs[i] / errs[i + 1] for i in range(2)]
    ok = all(3.5 <= r <= 4.5 for r in ratios)
    return _res("drift-refinement", ok, f"ratios {ratios[0]:.3f}, {ratios[1]:.3f}")


def normalization(functions) -> PropertyResult:
    worst = max(abs(grid_integrate_array(f.values ** 2, f.grid) - 1.0) for f in functions)
    return _res("normalization", worst <= 1e-10, f"max |int f^2 - 1| {worst:.2e}")


# -- gp-solver ----------------------------------------------------------------

def flow_refinement(V: TrapPotential, g: float) -> PropertyResult:
    params = FlowParams(stencil_order=2, residual_tol=1e-9)
    E = [minimize_nls(V, g, Grid(1, 6.0, n), params).energy for n in (65, 129, 257)]
    ratio = (E[0] - E[1]) / (E[1] - E[2])
    return _res("nls-refinement", 3.5 <= ratio <= 4.5, f"error ratio {ratio:.3f}")


def variational_bound(sol, V: TrapPotential, g: float, seed: int, trials: int = 100) -> PropertyResult:
    grid = sol.phi.grid
    x = grid.x
    rng = np.random.default_rng(seed)
    vvals = V.on_grid(grid)
    worst = math.inf
    from .core import negative_laplacian
    for _ in range(trials):
        c = rng.uniform(-1.5, 1.5)
        w = rng.uniform(0.4, 2.0)
        coeffs = rng.normal(size=4) * 0.3
        f = np.exp(-0.5 * ((x - c) / w) ** 2) * (1.0 + np.polynomial.hermite.hermval(x / w, coeffs) * 0.2)
        f[0] = f[-1] = 0.0
        f /= math.sqrt(grid_integrate_array(f * f, grid))
        energy = grid.h * float(np.sum(f * negative_laplacian(f, grid.h) + vvals * f * f + g * f ** 4))
        worst = min(worst, energy - sol.energy)
    return _res("variational-bound", worst >= -1e-10, f"min trial gap {worst:.3e}")


def concavity(V: TrapPotential, g: float, grid: Grid, params: FlowParams) -> PropertyResult:
    lams = np.linspace(0.5, 1.5, 5)
    worst = math.inf
    for which in ("trap", "interaction"):
        E = [perturbed_nls_energy(which, float(l), V, g, grid, params).energy for l in lams]
        for i in range(1, len(lams) - 1):
            worst = min(worst, E[i] - 0.5 * (E[i - 1] + E[i + 1]))
    return _res("lambda-concavity", worst >= -1e-8, f"min midpoint excess {worst:.3e}")


def hellmann_feynman(V: TrapPotential, g: float, grid: Grid, params: FlowParams) -> PropertyResult:
    from .gp import hellmann_feynman_check
    gaps = [hellmann_feynman_check(w, 1.0, 1e-2, V, g, grid, params)["gap"]
            for w in ("trap", "interaction")]
    return _res("hellmann-feynman-nls", max(gaps) < 1e-3, f"gaps {gaps[0]:.2e}, {gaps[1]:.2e}")


def flow_monotone(V: TrapPotential, g: float, grid: Grid) -> PropertyResult:
    from .core import gaussian_state, laplacian_bound, negative_laplacian
    from .flow import STEP_SAFETY, run_flow
    vvals = V.on_grid(grid)
    cell = grid.h

    def apply_h(phi):
        out = negative_laplacian(phi, grid.h)
        out += (vvals + 2.0 * g * phi * phi) * phi
        return out

    tau = STEP_SAFETY / (laplacian_bound(grid.h, 1) + float(np.max(vvals)) + 12.0 * g)
    res = run_flow(gaussian_state(grid, 0.5), apply_h,
                   lambda p, hp, mu: mu - g * cell * float(np.sum(p ** 4)), cell, tau,
                   FlowParams(residual_tol=1e-6, energy_tol=1e-10), record=True)
    rises = float(np.max(np.diff(res.energies))) if len(res.energies) > 1 else 0.0
    return _res("flow-monotone", rises <= 1e-12, f"largest increase {rises:.2e}")


# -- nbody-solver -------------------------------------------------------------

def symmetry_and_bookkeeping(state) -> PropertyResult:
    psi = state.psi.values
    worst = 0.0
    for i in range(1, state.N):
        worst = max(worst, float(np.max(np.abs(psi - np.swapaxes(psi, 0, i)))))
    book = abs(state.energy / state.N - (state.kinetic + state.trap + state.interaction))
    ok = worst <= 1e-10 and book <= 1e-10
    return _res(f"nbody-symmetry-N{state.N}-beta{state.beta:g}", ok, f"asymmetry {worst:.1e}, bookkeeping {book:.1e}")


def factorization(V: TrapPotential, grid: Grid, params: FlowParams) -> PropertyResult:
    one = minimize_nls(V, 0.0, grid, params)
    st = minimize_nbody(V, PairPotential.zero(), 2, 0.0, grid, params)
    diff = math.sqrt(grid.h ** 2 * float(np.sum((st.psi.values - product_state(one.phi, 2)) ** 2)))
    excess = st.energy / 2 - one.energy
    return _res("nbody-factorization", diff <= 1e-6 and excess <= 1e-8,
                f"||Psi - phi x phi|| {diff:.1e}, E_N/N - E_1 {excess:.1e}")


def product_upper_bound(state, nls, V, v0) -> PropertyResult:
    from .nbody import evaluate_nbody, canonical_psi
    trial = canonical_psi(product_state(nls.phi, state.N), state.grid.h ** state.N)
    E_trial = evaluate_nbody(trial, V, v0, state.N, state.beta, state.grid).energy
    gap = E_trial / state.N - state.energy / state.N
    return _res(f"product-upper-bound-N{state.N}-beta{state.beta:g}", gap >= -1e-10, f"trial excess {gap:.3e}")


def energy_trend(session, Ns) -> PropertyResult:
    nls = session.nls()
    flags = []
    for beta in (0.0, 0.25, 0.5):
        d = [abs(session.nbody(N, beta).energy / N - nls.energy) for N in Ns]
        flags.append(all(b <= a for a, b in zip(d, d[1:])))
    return _res("energy-trend", all(flags), f"per-beta flags {flags}")


# -- nelson-sim ---------------------------------------------------------------

def determinism(seed: int) -> PropertyResult:
    grid = Grid(1, 5.0, 101)
    rho = np.exp(-grid.x ** 2)
    rho /= grid_integrate_array(rho, grid)
    f = GridFunction(grid, rho)
    drift = FieldDrift(grid, drift_from_density(f).components)
    p = SdeParams(1e-2, 1.0, 64, seed)
    a = simulate(drift, sample_density(f, 64, seed), p)
    b = simulate(drift, sample_density(f, 64, seed), p)
    small = simulate(drift, sample_density(f, 16, seed), SdeParams(1e-2, 1.0, 16, seed))
    ok = np.array_equal(a.states, b.states) and np.array_equal(a.states[:16], small.states)
    return _res("simulation-determinism", ok, "bit-identical reruns and prefixes")


def stationarity(seed: int, M: int) -> PropertyResult:
    grid = Grid(1, 5.0, 101)
    worst = 0.0
    for name, rho in (("gauss", np.exp(-grid.x ** 2)),
                      ("double-bump", np.exp(-2.0 * (grid.x - 1.2) ** 2) + np.exp(-2.0 * (grid.x + 1.2) ** 2))):
        rho = rho / grid_integrate_array(rho, grid)
        f = GridFunction(grid, rho)
        drift = FieldDrift(grid, drift_from_density(f).components)
        ens = simulate(drift, sample_density(f, M, seed), SdeParams(1e-3, 1.0, M, seed, 10))
        for t in ens.times:
            worst = max(worst, tv_density(empirical_density(ens, 0, (t, t), grid), f))
    # histogram error on ~20 effective bins with M samples
    threshold = 3.0 * math.sqrt(40.0 / (2.0 * math.pi * M))
    return _res("stationarity", worst < threshold, f"max TV {worst:.4f} < {threshold:.4f}")


def nbody_stationarity(session, N: int, beta: float, M: int) -> PropertyResult:
    st = session.nbody(N, beta)
    grid = session.grid
    rho = GridFunction(grid, st.density(), N)
    ens = simulate(SymmetricDrift(grid, nbody_drift_component(st).values),
                   sample_density(rho, M, session.seed), SdeParams(1e-3, 1.0, M, session.seed, 5))
    target = marginal_density(st, 1)
    tv = tv_density(empirical_density(ens, 0, (1.0, 1.0), grid), target)
    return _res(f"nbody-stationarity-N{N}", tv < 0.05, f"final TV {tv:.4f}")


# -- chaos-metrics ------------------------------------------------------------

def random_inequalities(seed: int, instances: int) -> list[PropertyResult]:
    rng = np.random.default_rng(seed)
    pins = chain = 0
    for _ in range(instances):
        k = int(rng.integers(2, 17))
        P, Q = rng.dirichlet(np.ones(k)), rng.dirichlet(np.ones(k))
        pins += pinsker_check(P, Q)["violations"]
        a, b = int(rng.integers(2, 9)), int(rng.integers(2, 9))
        J = rng.dirichlet(np.ones(a * b)).reshape(a, b)
        if chain_rule_gap(J, rng.dirichlet(np.ones(a)), rng.dirichlet(np.ones(b))) < -1e-12:
            chain += 1
    grid = Grid(1, 2.0, 12)
    sup = conv = 0
    for _ in range(instances):
        G = np.exp(rng.normal(scale=0.5, size=(12, 12)))
        G /= grid_integrate_array(G, grid)
        H = np.exp(rng.normal(scale=0.5, size=(12, 12)))
        H /= grid_integrate_array(H, grid)
        if fisher_superadditivity_gap(GridFunction(grid, G, 2), 1) < -1e-8:
            sup += 1
        alpha = float(rng.uniform())
        if fisher_convexity_check(GridFunction(grid, G, 2), GridFunction(grid, H, 2), alpha) < -1e-8:
            conv += 1
    return [_res("pinsker", pins == 0, f"{pins} violations in {instances}"),
            _res("chain-rule", chain == 0, f"{chain} negative gaps in {instances}"),
            _res("fisher-superadditivity", sup == 0, f"{sup} violations in {instances}"),
            _res("fisher-convexity", conv == 0, f"{conv} violations in {instances}")]


def divergence_basics() -> PropertyResult:
    P = np.array([0.2, 0.3, 0.5])
    ok = kl_discrete(P, P) == 0.0 and kl_discrete(P, np.array([0.3, 0.3, 0.4])) > 0
    prod = np.outer([0.4, 0.6], [0.1, 0.9])
    ok = ok and abs(chain_rule_gap(prod, [0.5, 0.5], [0.5, 0.5])) <= 1e-10
    return _res("divergence-basics", ok, "KL(P,P)=0, KL>0 off-diagonal, product chain equality")


def fisher_kinetic(session) -> PropertyResult:
    """I(phi^2) = 4 K on a solve four times finer than the session grid.

    The two sides use different stencils and differ by O(h^4); at the
    session resolution that gap is around 1e-4.
    """
    g = session.grid
    fine = Grid(g.d, g.L, 4 * (g.n - 1) + 1) if g.d == 1 else g
    sol = minimize_nls(session.V, session.g_nls, fine, session.flow)
    I = fisher_information(GridFunction(fine, sol.phi.values ** 2))["I"]
    gap = abs(I - 4.0 * sol.kinetic)
    return _res("fisher-kinetic", gap <= 1e-6, f"|I - 4 K| {gap:.2e} at n={fine.n}")


def chaos_cells(session, Ns, beta: float) -> list[PropertyResult]:
    cells = [session.chaos_cell(N, beta, M=session.cfg.verify.M) for N in Ns]
    out = []
    for c in cells:
        bad = c.report.check()
        out.append(_res(f"report-invariants-N{c.report.N}", not bad, f"violations {bad}"))
        out.append(_res(f"kac-bound-N{c.report.N}", c.kac_ok,
                        f"{c.report.kacMetric:.3e} <= {c.kac_bound:.3e}"))
        out.append(_res(f"identity-gap-N{c.report.N}", c.report.identityGap < 1e-3,
                        f"gap {c.report.identityGap:.2e} ({c.diagnostics['identityReading']})"))
    for field in ("driftMismatch", "normalizedEntropy", "kacMetric"):
        vals = [getattr(c.report, field) for c in cells]
        out.append(_res(f"trend-{field}", all(b <= a for a, b in zip(vals, vals[1:])),
                        ", ".join(f"{v:.3e}" for v in vals)))
    tvs = [c.report.kMarginalTV[0] for c in cells]
    out.append(_res("trend-kMarginalTV1", all(b <= a for a, b in zip(tvs, tvs[1:])),
                    ", ".join(f"{v:.3e}" for v in tvs)))
    return out


# -- bec-lab ------------------------------------------------------------------

def cache_transparency(session) -> PropertyResult:
    import tempfile
    from .pipeline import Session
    with tempfile.TemporaryDirectory() as root:
        first = Session(session.cfg, True, root, session.seed).nbody(2, 0.5)
        second = Session(session.cfg, True, root, session.seed).nbody(2, 0.5)
    ok = (np.array_equal(first.psi.values, second.psi.values)
          and first.energy == second.energy and first.components == second.components)
    return _res("cache-transparency", ok, "fresh solve and cache hit agree bit for bit")


def run_all(session, log: Callable[[str], None] = lambda s: None) -> list[PropertyResult]:
    cfg = session.cfg
    V, v0, g = session.V, session.v0, session.g_nls
    params = session.flow
    grid = session.grid
    seed = session.seed
    Ns = sorted(cfg.verify.N)
    results: list[PropertyResult] = []

    def add(items):
        items = items if isinstance(items, list) else [items]
        for r in items:
            log(f"[{'pass' if r.passed else 'FAIL'}] {r.name}: {r.detail}")
        results.extend(items)

    nls = session.nls()
    states = [session.nbody(N, b) for b in cfg.sweep.beta for N in Ns]
    add(normalization([nls.phi] + [s.psi for s in states]))
    if v0.profile != "zero":
        add(scaling_identity(v0))
    add(gradient_refinement())
    add(flow_monotone(V, g, grid))
    add(flow_refinement(V, g))
    add(variational_bound(nls, V, g, seed))
    add(concavity(V, g, grid, params))
    add(hellmann_feynman(V, g, grid, params))
    add([symmetry_and_bookkeeping(s) for s in states])
    add(factorization(V, grid, params))
    add([product_upper_bound(s, nls, V, v0) for s in states])
    add(energy_trend(session, Ns))
    add(determinism(seed))
    add(stationarity(seed, cfg.verify.M))
    add(nbody_stationarity(session, Ns[0], cfg.sweep.beta[-1], cfg.verify.M))
    add(random_inequalities(seed, cfg.verify.instances))
    add(divergence_basics())
    add(fisher_kinetic(session))
    add(chaos_cells(session, Ns, cfg.sweep.beta[-1]))
    add(cache_transparency(session))
    return results
