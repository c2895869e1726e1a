import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from beclab.core import DomainError, PairPotential
from beclab.scattering import (ball_energy, ball_energy_check, ball_formula, scattering_length,
                               scattering_limit_sweep)


def test_no_potential_no_length():
    res = scattering_length(PairPotential.zero(dim=3))
    assert res.a == 0.0 and res.four_pi_a == 0.0


def test_rejects_one_dimensional():
    with pytest.raises(DomainError):
        scattering_length(PairPotential("bump", 1.0, 1.0, dim=1))


def test_outer_branch_is_linear():
    res = scattering_length(PairPotential("bump", 2.0, 1.0, dim=3), Rmax=3.0)
    out = res.r > 1.0
    np.testing.assert_allclose(res.u[out], res.r[out] - res.a, atol=1e-12)


def test_soft_sphere_closed_form():
    # u'' = K u inside r < 1: u = sinh(k r), a = 1 - tanh(k) / k
    for K in (0.5, 4.0, 1e4):
        res = scattering_length((lambda r, K=K: np.where(np.asarray(r) <= 1.0, K, 0.0), 1.0))
        k = math.sqrt(K)
        assert res.a == pytest.approx(1.0 - math.tanh(k) / k, rel=1e-9)
    assert res.a == pytest.approx(1.0, rel=0.02)  # nearly hard sphere


def test_born_limit():
    gaps = []
    for eps in (0.1, 0.01, 0.001):
        v = PairPotential("bump", eps, 1.0, dim=3)
        res = scattering_length(v)
        gaps.append(res.four_pi_a / v.coupling - 1.0)
    assert all(g < 0 for g in gaps)
    assert abs(gaps[1]) < abs(gaps[0]) / 8 and abs(gaps[2]) < abs(gaps[1]) / 8


@settings(max_examples=25)
@given(height=st.floats(1e-3, 50.0), radius=st.floats(0.2, 3.0))
def test_four_pi_a_below_coupling(height, radius):
    v = PairPotential("bump", height, radius, dim=3)
    res = scattering_length(v)
    assert 0.0 < res.four_pi_a <= v.coupling
    assert res.a <= radius


def test_limit_sweep_trend():
    v0 = PairPotential.with_coupling("bump", 1.0, 1.0, dim=3)
    rows = scattering_limit_sweep(v0, 0.5, [2, 8, 32, 128])
    assert all(r.four_pi_a <= r.g for r in rows)
    gaps = [abs(r.gap) for r in rows]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))


def test_limit_sweep_zero_and_order():
    rows = scattering_limit_sweep(PairPotential.zero(3), 0.5, [2, 8])
    assert all(r.a == 0.0 for r in rows)
    with pytest.raises(DomainError):
        scattering_limit_sweep(PairPotential("bump", 1.0, 1.0, dim=3), 0.5, [8, 2])
    with pytest.raises(DomainError):
        scattering_limit_sweep(PairPotential("bump", 1.0, 1.0, dim=3), 1.0, [2])


def test_ball_energy_examples():
    assert ball_energy(PairPotential.zero(3), 5.0) == pytest.approx(0.0, abs=1e-12)
    weak = PairPotential("bump", 0.1, 1.0, dim=3)
    check = ball_energy_check(weak, 10.0)
    assert check["relative_gap"] < 1e-6
    assert ball_formula(check["a"], 1e8) == pytest.approx(4 * math.pi * check["a"], rel=1e-7)
    with pytest.raises(DomainError):
        ball_formula(1.0, 0.5)


def test_ball_energy_strong_potential():
    res = ball_energy_check(PairPotential("bump", 20.0, 1.0, dim=3), 4.0, cells=40000)
    assert res["relative_gap"] < 1e-4
