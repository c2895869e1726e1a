import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from beclab.core import (DomainError, Grid, GridFunction, PairPotential, TrapPotential,
                         gaussian_state, negative_laplacian)
from beclab.flow import ConvergenceError, FlowParams, MonotonicityError, run_flow
from beclab.gp import (evaluate_nls, hellmann_feynman_check, minimize_hartree, minimize_nls,
                       nls_residual, perturbed_nls_energy)
from frozen import GP_SHOOTING

FINE = Grid(1, 8.0, 513)


@pytest.fixture(scope="module")
def oscillator():
    return minimize_nls(TrapPotential.harmonic(), 0.0, FINE)


@pytest.fixture(scope="module")
def strong():
    return minimize_nls(TrapPotential.harmonic(), 5.0, FINE)


def test_oscillator(oscillator):
    assert abs(oscillator.energy - 1.0) < 1e-6
    assert abs(oscillator.mu - 1.0) < 1e-5
    x = FINE.x
    exact = math.pi ** -0.25 * np.exp(-0.5 * x * x)
    assert np.max(np.abs(oscillator.phi.values - exact)) < 1e-5
    assert oscillator.interaction == 0.0
    assert oscillator.kinetic == pytest.approx(0.5, abs=1e-6)
    assert oscillator.trap == pytest.approx(0.5, abs=1e-6)


def test_three_dimensional_oscillator():
    sol = minimize_nls(TrapPotential.harmonic(), 0.0, Grid(3, 6.0, 41))
    assert abs(sol.energy - 3.0) < 1e-3


@pytest.mark.parametrize("g", sorted(GP_SHOOTING))
def test_matches_shooting_oracle(g, strong):
    sol = strong if g == 5.0 else minimize_nls(TrapPotential.harmonic(), g, FINE)
    ref = GP_SHOOTING[g]
    assert sol.energy == pytest.approx(ref["energy"], abs=1e-7)
    assert sol.mu == pytest.approx(ref["mu"], abs=1e-6)


def test_bookkeeping(strong):
    c = strong.components
    assert strong.energy == pytest.approx(sum(c.values()), abs=1e-12)
    assert strong.mu == pytest.approx(strong.energy + strong.interaction, abs=1e-12)
    assert strong.interaction == pytest.approx(5.0 * strong.quartic, rel=1e-12)
    assert np.all(strong.phi.values[1:-1] > 0)
    assert strong.residual < 1e-8
    assert not strong.boundary_warning


def test_residual_contrasts(oscillator):
    V = TrapPotential.harmonic()
    errs = []
    for n in (129, 257):
        g = Grid(1, 8.0, n)
        exact = math.pi ** -0.25 * np.exp(-0.5 * g.x ** 2)
        exact[[0, -1]] = 0.0
        errs.append(nls_residual(GridFunction(g, exact), 1.0, V, 0.0))
    assert errs[1] < errs[0] < 1e-3
    rough = np.abs(np.sin(3 * FINE.x)) * np.exp(-FINE.x ** 2)
    rough /= math.sqrt(FINE.h * np.sum(rough ** 2))
    assert nls_residual(GridFunction(FINE, rough), 1.0, V, 0.0) > 1.0
    assert oscillator.residual < 1e-8


def test_boundary_warning_on_small_box():
    sol = minimize_nls(TrapPotential.harmonic(), 0.0, Grid(1, 1.2, 65))
    assert sol.boundary_warning


def test_rejects_negative_coupling():
    with pytest.raises(DomainError):
        minimize_nls(TrapPotential.harmonic(), -1.0, Grid(1, 6.0, 65))


def test_flow_cap_keeps_last_iterate():
    with pytest.raises(ConvergenceError) as info:
        minimize_nls(TrapPotential.harmonic(), 1.0, Grid(1, 6.0, 65), FlowParams(max_iterations=5))
    assert info.value.last.shape == (65,)
    assert math.isfinite(info.value.energy)


def test_oversized_step_is_caught():
    with pytest.raises(MonotonicityError):
        minimize_nls(TrapPotential.harmonic(), 1.0, Grid(1, 6.0, 65), FlowParams(time_step=1.0))


def test_energy_decreases_along_flow():
    grid = Grid(1, 6.0, 129)
    v = TrapPotential.harmonic().on_grid(grid)
    g, cell = 2.0, grid.h

    def apply_h(phi):
        return negative_laplacian(phi, grid.h) + (v + 2 * g * phi * phi) * phi

    res = run_flow(gaussian_state(grid, 2.0), apply_h,
                   lambda phi, hphi, mu: mu - g * cell * float(np.sum(phi ** 4)),
                   cell, 1e-3, FlowParams(), record=True)
    assert max(np.diff(res.energies)) <= 1e-12


def test_refinement_is_second_order_with_second_order_stencil():
    V, params = TrapPotential.harmonic(), FlowParams(stencil_order=2)
    E = [minimize_nls(V, 1.0, Grid(1, 6.0, n), params).energy for n in (65, 129, 257)]
    ratio = (E[0] - E[1]) / (E[1] - E[2])
    assert 3.6 < ratio < 4.4


def test_variational_bound(strong, rng):
    V = TrapPotential.harmonic().on_grid(FINE)
    for _ in range(100):
        width = rng.uniform(0.3, 2.5)
        centre = rng.uniform(-1, 1)
        trial = np.exp(-0.5 * ((FINE.x - centre) / width) ** 2) * (1 + 0.3 * rng.standard_normal()
                                                                   * np.tanh(FINE.x))
        trial = np.abs(trial)
        trial[[0, -1]] = 0.0
        trial /= math.sqrt(FINE.h * np.sum(trial ** 2))
        trial[1:-1] = np.maximum(trial[1:-1], 1e-300)
        E = evaluate_nls(trial, FINE, V, 5.0).energy
        assert E >= strong.energy - 1e-12


def test_concavity_in_lambda():
    grid, V = Grid(1, 6.0, 129), TrapPotential.harmonic()
    for which in ("trap", "interaction"):
        E = [perturbed_nls_energy(which, lam, V, 1.0, grid).energy for lam in (0.5, 1.0, 1.5)]
        assert E[1] >= 0.5 * (E[0] + E[2]) - 1e-10


def test_perturbation_examples():
    grid, V = Grid(1, 6.0, 257), TrapPotential.harmonic()
    base = minimize_nls(V, 1.0, grid)
    same = perturbed_nls_energy("interaction", 1.0, V, 1.0, grid)
    assert same.energy == pytest.approx(base.energy, abs=1e-12)
    four = perturbed_nls_energy("trap", 4.0, V, 0.0, grid)
    assert four.energy == pytest.approx(2.0, abs=1e-5)
    off = perturbed_nls_energy("interaction", 0.0, V, 1.0, grid)
    assert off.energy == pytest.approx(minimize_nls(V, 0.0, grid).energy, abs=1e-12)
    with pytest.raises(DomainError):
        perturbed_nls_energy("kinetic", 1.0, V, 1.0, grid)


@pytest.mark.parametrize("which, g, tol", [("trap", 0.0, 1e-4), ("trap", 1.0, 1e-3),
                                           ("interaction", 5.0, 1e-3)])
def test_hellmann_feynman(which, g, tol):
    res = hellmann_feynman_check(which, 1.0, 1e-2, TrapPotential.harmonic(), g,
                                 Grid(1, 8.0, 257))
    assert res["gap"] < tol


def test_hellmann_feynman_interaction_without_coupling():
    res = hellmann_feynman_check("interaction", 1.0, 1e-2, TrapPotential.harmonic(), 0.0,
                                 Grid(1, 6.0, 129))
    assert res["lhs"] == 0.0 and res["rhs"] == 0.0


# -- Hartree ----------------------------------------------------------------------

def test_hartree_without_pair_is_oscillator():
    grid = Grid(1, 6.0, 129)
    a = minimize_hartree(TrapPotential.harmonic(), PairPotential.zero(), grid)
    b = minimize_nls(TrapPotential.harmonic(), 0.0, grid)
    assert a.energy == pytest.approx(b.energy, abs=1e-12)


def test_narrow_pair_approaches_contact():
    grid = Grid(1, 6.0, 513)
    v0 = PairPotential.with_coupling("bump", 1.0, 3 * grid.h)
    a = minimize_hartree(TrapPotential.harmonic(), v0, grid)
    b = minimize_nls(TrapPotential.harmonic(), 1.0, grid)
    assert a.energy == pytest.approx(b.energy, rel=0.02)


def test_weak_pair_is_first_order():
    grid = Grid(1, 6.0, 129)
    V = TrapPotential.harmonic()
    v0 = PairPotential("bump", 1e-3, 10.0)
    free = minimize_nls(V, 0.0, grid)
    rho = free.phi.values ** 2
    x = grid.x
    first = grid.h ** 2 * float(rho @ v0(x[:, None] - x[None, :]) @ rho)
    a = minimize_hartree(V, v0, grid)
    assert a.energy - 1.0 == pytest.approx(first, rel=1e-2, abs=1e-6)


@settings(max_examples=15)
@given(g=st.floats(0.0, 8.0))
def test_energy_brackets(g):
    grid = Grid(1, 6.0, 97)
    sol = minimize_nls(TrapPotential.harmonic(), g, grid)
    assert sol.energy >= 1.0 - 1e-4  # interaction is non-negative
    assert sol.mu >= sol.energy - 1e-12
    assert sol.residual < 1e-8
