import math

import numpy as np
import pytest

from sfflab.dynamics import ALL_TO_ALL, DEFAULT_MAP, SpecError, SystemSpec
from sfflab.orbits import ShiftVector, family_iterator
from sfflab.phases import (
    SeriesError,
    TableError,
    VarianceTable,
    action_difference_identity_check,
    bond_variance_time_average,
    clt_diagnostics,
    per_bond_variance_table,
    phase_difference,
    quotient_projection,
    sample_phase_distribution,
    series_from_correlations,
    variance_series,
    variance_time_average,
)
from sfflab.util import philox

from oracles import geometric_series_variance, phase_difference_direct


def _full_period_family(spec, T, index=0):
    fams = [
        f for f in family_iterator(spec, T)
        if all(o.primitive_period == T for o in f.reps)
    ]
    return fams[index]


def test_phase_same_shift_is_exactly_zero():
    spec = SystemSpec(L=2)
    fam = _full_period_family(spec, 2)
    assert phase_difference(fam, (0, 1), (0, 1), spec) == 0.0


def test_phase_synchronous_shift_is_exactly_zero():
    spec = SystemSpec(L=2)
    for T in (2, 3, 4):
        fam = _full_period_family(spec, T)
        for c in range(1, T):
            assert phase_difference(fam, (0, 1), ((0 + c) % T, (1 + c) % T), spec) == 0.0


def test_phase_antisymmetry_exact():
    spec = SystemSpec(L=2)
    fam = _full_period_family(spec, 3, index=2)
    a = phase_difference(fam, (0, 1), (2, 0), spec)
    b = phase_difference(fam, (2, 0), (0, 1), spec)
    assert a == -b


def test_phase_against_direct_summation_oracle():
    spec = SystemSpec(L=2)
    T = 2
    fam = _full_period_family(spec, T)
    cycles = [o.position_cycle(DEFAULT_MAP).tolist() for o in fam.reps]
    for r, s in (((0, 0), (0, 1)), ((1, 0), (0, 1)), ((0, 1), (1, 1))):
        want = phase_difference_direct(cycles, r, s, T)
        got = phase_difference(fam, r, s, spec)
        assert got == pytest.approx(want, abs=1e-12)


def test_action_identity_eps0_and_quadratic_residual():
    spec = SystemSpec(L=2)
    fam = _full_period_family(spec, 2)
    res = action_difference_identity_check(fam, spec, [0.0, 1e-3, 1e-4, 1e-5], (0, 0), (0, 1))
    assert res.all_converged
    assert res.deltas[0] == 0.0  # eps = 0
    assert 1.8 <= res.exponent <= 2.2
    # residual ratio between consecutive decades is ~100
    ratios = [res.residuals[i] / res.residuals[i + 1] for i in (1, 2)]
    assert all(30 < r < 300 for r in ratios)


def test_action_identity_synchronous_pair_vanishes():
    spec = SystemSpec(L=2)
    fam = _full_period_family(spec, 3, index=1)
    res = action_difference_identity_check(fam, spec, [1e-3, 1e-4], (0, 1), (1, 2))
    assert res.phi == 0.0
    assert all(abs(d) < 1e-9 for d in res.deltas)


def test_quotient_projection():
    T = 4
    assert quotient_projection((3, 3, 3), T) == (0, 0)
    assert quotient_projection((1, 2, 3), T) == (1, 2)
    s = (0, 2, 1)
    shifted = tuple((v + 3) % T for v in s)
    assert quotient_projection(s, T) == quotient_projection(shifted, T)
    sv = ShiftVector.of((1, 2, 3), 4)
    assert quotient_projection(sv) == (1, 2)


def test_sample_phase_distribution_zero_shift():
    spec = SystemSpec(L=2)
    sset = sample_phase_distribution(spec, 4, (0, 0), budget=2000, seed=1)
    assert np.all(sset.phi_tilde == 0.0)
    rep = clt_diagnostics(sset)
    assert rep.degenerate


def test_sample_phase_distribution_rejects_zero_budget():
    with pytest.raises(SpecError):
        sample_phase_distribution(SystemSpec(L=2), 4, (0, 1), budget=0, seed=1)


def test_sample_phase_mean_and_mode_label():
    spec = SystemSpec(L=2)
    sset = sample_phase_distribution(spec, 6, (0, 1), budget=60_000, seed=2)
    assert sset.mode == "exact"
    se = sset.phi_tilde.std() / math.sqrt(len(sset.phi_tilde))
    assert abs(sset.phi_tilde.mean()) < 4.0 * se
    sproxy = sample_phase_distribution(spec, 6, (0, 1), budget=60_000, seed=3, mode="proxy")
    assert sproxy.mode == "proxy"
    # exact and proxy sampling agree on the variance
    v1, v2 = sset.phi_tilde.var(), sproxy.phi_tilde.var()
    comb = math.hypot(v1, v2) * math.sqrt(2.0 / 60_000) * 2.0
    assert abs(v1 - v2) < 3.0 * comb + 0.05


def test_phase_sample_rescaling_invariant():
    spec = SystemSpec(L=2)
    sset = sample_phase_distribution(spec, 5, (0, 2), budget=5000, seed=4)
    for s in sset.samples()[:100]:
        assert s.phi_tilde == pytest.approx(s.phi / math.sqrt(5), rel=1e-15)


def test_empirical_variance_matches_series_value():
    spec = SystemSpec(L=2)
    T, s = 32, (0, 1)
    sset = sample_phase_distribution(spec, T, s, budget=100_000, seed=5, mode="proxy")
    emp = sset.phi_tilde.var()
    emp_err = emp * math.sqrt(2.0 / len(sset.phi_tilde))
    sv = variance_series(spec, s, t_max=6, samples=200_000, seed=6)
    comb = math.hypot(emp_err, sv.std_error)
    assert abs(emp - sv.sigma2) <= 3.0 * comb + sv.truncation_bound


def test_clt_diagnostics_selftest_normal():
    rng = philox(7)
    rep = clt_diagnostics(rng.normal(0.0, 1.0, 100_000))
    assert rep.ks_distance < 0.01
    assert abs(rep.skewness) < 0.05
    assert abs(rep.excess_kurtosis) < 0.08


def test_clt_diagnostics_needs_enough_samples():
    with pytest.raises(SpecError):
        clt_diagnostics(np.zeros(10))


def test_variance_time_average_synchronous_coboundary():
    spec = SystemSpec(L=2)
    est = variance_time_average(spec, (1, 1), horizon=512, samples=20_000, seed=8)
    assert est.sigma2 < 3.0 * est.std_error + 0.05


def test_variance_time_average_shift_invariance():
    spec = SystemSpec(L=2)
    a = variance_time_average(spec, (0, 1), horizon=256, samples=20_000, seed=9)
    b = variance_time_average(spec, (2, 3), horizon=256, samples=20_000, seed=10)
    comb = math.hypot(a.std_error, b.std_error)
    assert abs(a.sigma2 - b.sigma2) <= 3.0 * comb


def test_variance_nearest_neighbour_additivity_three_sites():
    spec = SystemSpec(L=3)
    s = (0, 1, 2)
    full = variance_time_average(spec, s, horizon=256, samples=40_000, seed=11)
    seeds = (12, 13, 14)
    parts = []
    for l, seed in enumerate(seeds):
        st = abs(s[l] - s[(l + 1) % 3])
        v, e = bond_variance_time_average(DEFAULT_MAP, st, 256, 40_000, seed)
        parts.append((v, e))
    total = sum(v for v, _ in parts)
    comb = math.sqrt(full.std_error**2 + sum(e**2 for _, e in parts))
    assert abs(full.sigma2 - total) <= 3.0 * comb


def test_variance_series_geometric_oracle():
    eta = 0.5
    sigma2, bound, eta_hat = series_from_correlations(
        lambda t: eta ** abs(t), lambda t: 0.0, t_max=60
    )
    assert abs(sigma2 - geometric_series_variance(eta)) < 1e-9
    assert sigma2 == pytest.approx(6.0, abs=1e-9)
    assert eta_hat == pytest.approx(eta, rel=1e-9)
    assert bound < 1e-12


def test_variance_series_instantaneous_model():
    c0 = 0.7
    sigma2, bound, _ = series_from_correlations(
        lambda t: c0 if t == 0 else 0.0, lambda t: 0.0, t_max=10
    )
    assert sigma2 == pytest.approx(2.0 * c0, abs=1e-15)


def test_variance_series_rejects_nondecaying():
    with pytest.raises(SeriesError):
        series_from_correlations(lambda t: 1.0, lambda t: 0.0, t_max=10)


def test_variance_estimators_agree_on_default_system():
    spec = SystemSpec(L=2)
    s = (0, 1)
    ta = variance_time_average(spec, s, horizon=512, samples=30_000, seed=15)
    sv = variance_series(spec, s, t_max=6, samples=150_000, seed=16)
    comb = math.hypot(ta.std_error, sv.std_error)
    assert abs(ta.sigma2 - sv.sigma2) <= 3.0 * comb + sv.truncation_bound
    assert ta.plateau_ok


def test_per_bond_table_structure():
    spec = SystemSpec(L=2)
    table = per_bond_variance_table(spec, 5, samples=10_000, seed=17, horizon=160)
    assert table.values[0] == (0.0, 0.0)
    for st in range(1, 5):
        v, e = table.values[st]
        assert v == pytest.approx(1.0, abs=4.0 * e)
    arr = table.sigma2_array()
    assert arr.shape == (5,)


def test_per_bond_table_series_estimator():
    spec = SystemSpec(L=2)
    table = per_bond_variance_table(spec, 3, estimator="series", samples=60_000,
                                    seed=18, t_max=5)
    for st in (1, 2):
        v, e = table.values[st]
        assert v == pytest.approx(1.0, abs=4.0 * e)


def test_per_bond_table_requires_nn_topology():
    with pytest.raises(SpecError):
        per_bond_variance_table(SystemSpec(L=2, topology=ALL_TO_ALL), 4)


def test_variance_table_validation():
    with pytest.raises(TableError):
        VarianceTable(T=3, kind="per-bond", values={0: (0.5, 0.0), 1: (1.0, 0.0), 2: (1.0, 0.0)})
    with pytest.raises(TableError):
        VarianceTable(T=2, kind="per-bond", values={0: (0.0, 0.0), 1: (-1.0, 0.0)})
    t = VarianceTable(T=3, kind="per-bond", values={0: (0.0, 0.0), 2: (1.0, 0.0)})
    with pytest.raises(TableError):
        t.sigma2_array()
