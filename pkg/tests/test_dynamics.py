import math

import numpy as np
import pytest

from sfflab.dynamics import (
    ALL_TO_ALL,
    CatMapSpec,
    DEFAULT_MAP,
    ManyBodyPoint,
    SpecError,
    SystemSpec,
    TorusPoint,
    coupled_step,
    coupled_step_unreduced,
    estimate_correlation,
    interaction_derivative,
    subsystem_step,
)
from sfflab.util import mod1, philox

from oracles import straight_line_coupled_step


def test_cat_map_validation():
    with pytest.raises(SpecError):
        CatMapSpec(2, 1, 1, 2)  # det 3
    with pytest.raises(SpecError):
        CatMapSpec(1, 1, 0, 1)  # parabolic
    CatMapSpec(2, 1, 1, 1)


def test_subsystem_step_fixed_point():
    assert subsystem_step(TorusPoint(0.0, 0.0), DEFAULT_MAP) == TorusPoint(0.0, 0.0)


def test_subsystem_step_direct_substitution():
    out = subsystem_step(TorusPoint(0.5, 0.5), DEFAULT_MAP)
    assert out.q == 0.5 and out.p == 0.0


def test_subsystem_step_inverse_roundtrip():
    inv = CatMapSpec(1, -1, -1, 2)  # inverse of the default map
    rng = philox(1)
    for _ in range(50):
        x = TorusPoint(float(rng.random()), float(rng.random()))
        y = subsystem_step(subsystem_step(x, DEFAULT_MAP), inv)
        dq = min(abs(y.q - x.q), 1.0 - abs(y.q - x.q))
        dp = min(abs(y.p - x.p), 1.0 - abs(y.p - x.p))
        assert dq < 1e-12 and dp < 1e-12


def test_mod1_half_open_edge():
    vals = mod1(np.array([-1e-18, -0.25, 0.999999999, 2.0, -2.0]))
    assert np.all(vals >= 0.0) and np.all(vals < 1.0)


def test_coupled_step_decouples_bitwise_at_eps0():
    spec = SystemSpec(L=3, epsilon=0.0)
    rng = philox(2)
    for _ in range(20):
        x = ManyBodyPoint.from_arrays(rng.random(3), rng.random(3))
        y = coupled_step(x, spec)
        for site_in, site_out in zip(x.sites, y.sites):
            ref = subsystem_step(site_in, DEFAULT_MAP)
            assert site_out.q == ref.q and site_out.p == ref.p


def test_coupled_step_against_straight_line_oracle():
    spec = SystemSpec(L=2, epsilon=1e-3)
    x = ManyBodyPoint.from_arrays([0.3, 0.1], [0.7, 0.2])
    y = coupled_step(x, spec)
    q1, p1, q2, p2 = straight_line_coupled_step(0.3, 0.7, 0.1, 0.2, 1e-3)
    assert abs(y.sites[0].q - q1) < 1e-14
    assert abs(y.sites[0].p - p1) < 1e-14
    assert abs(y.sites[1].q - q2) < 1e-14
    assert abs(y.sites[1].p - p2) < 1e-14


def test_coupled_step_jacobian_is_symplectic():
    spec = SystemSpec(L=2, epsilon=0.1)
    rng = philox(3)
    h = 1e-6
    for _ in range(100):
        q = rng.random(2)
        p = rng.random(2)
        J = np.zeros((4, 4))
        base = np.concatenate(coupled_step_unreduced(q, p, spec))
        for i in range(4):
            dq, dp = q.copy(), p.copy()
            if i < 2:
                dq[i] += h
            else:
                dp[i - 2] += h
            plus = np.concatenate(coupled_step_unreduced(dq, dp, spec))
            if i < 2:
                dq[i] -= 2 * h
            else:
                dp[i - 2] -= 2 * h
            minus = np.concatenate(coupled_step_unreduced(dq, dp, spec))
            J[:, i] = (plus - minus) / (2 * h)
            _ = base
        assert abs(np.linalg.det(J) - 1.0) < 1e-8


def test_interaction_derivative_two_bonds_at_equal_positions():
    spec = SystemSpec(L=2)
    x = ManyBodyPoint.from_arrays([0.25, 0.25], [0.1, 0.9])
    assert interaction_derivative(x, spec) == pytest.approx(2.0, abs=1e-14)


def test_interaction_derivative_three_site_ring():
    spec = SystemSpec(L=3)
    x = ManyBodyPoint.from_arrays([0.0, 1.0 / 3.0, 2.0 / 3.0], [0.0, 0.0, 0.0])
    assert interaction_derivative(x, spec) == pytest.approx(-1.5, abs=1e-12)


def test_interaction_derivative_all_to_all_ordered_pairs():
    spec = SystemSpec(L=3, topology=ALL_TO_ALL)
    x = ManyBodyPoint.from_arrays([0.4, 0.4, 0.4], [0.1, 0.2, 0.3])
    # six ordered pairs, all at zero separation
    assert interaction_derivative(x, spec) == pytest.approx(6.0, abs=1e-12)


def test_interaction_derivative_mean_zero():
    spec = SystemSpec(L=2)
    rng = philox(4)
    n = 1_000_000
    vals = interaction_derivative(rng.random((n, 2)), spec)
    se = vals.std() / math.sqrt(n)
    assert abs(vals.mean()) < 4.0 * se


def test_correlation_zero_shift_positive():
    spec = SystemSpec(L=2)
    est = estimate_correlation(spec, (0, 0), samples=200_000, seed=5)
    assert est.value > 5.0 * est.std_error
    assert est.value == pytest.approx(2.0, abs=5 * est.std_error)


def test_correlation_mixing_long_run():
    # long-run Monte Carlo oracle: correlations at t=20 indistinguishable from 0
    spec = SystemSpec(L=2)
    est = estimate_correlation(spec, (20, 20), samples=10_000_000, seed=6)
    assert abs(est.value) < 5.0 * est.std_error


def test_correlation_reflection_symmetry():
    spec = SystemSpec(L=2)
    a = estimate_correlation(spec, (1, 2), samples=400_000, seed=7)
    b = estimate_correlation(spec, (-1, -2), samples=400_000, seed=8)
    comb = math.hypot(a.std_error, b.std_error)
    assert abs(a.value - b.value) <= 3.0 * comb


def test_correlation_rejects_zero_samples():
    with pytest.raises(SpecError):
        estimate_correlation(SystemSpec(L=2), (0, 0), samples=0, seed=1)


def test_correlation_provenance():
    est = estimate_correlation(SystemSpec(L=2), (1, 0), samples=1000, seed=42)
    assert est.seed == 42 and est.samples == 1000


def test_system_spec_validation():
    with pytest.raises(SpecError):
        SystemSpec(L=1)  # periodic chain needs two sites
    with pytest.raises(SpecError):
        SystemSpec(L=2, epsilon=-0.1)
    with pytest.raises(SpecError):
        SystemSpec(L=2, topology="ring-of-fire")
    SystemSpec(L=1, topology=ALL_TO_ALL)
