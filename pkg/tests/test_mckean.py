import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from inelastic_kac.mckean import (CappedDraw, Ensemble, WorkLimitExceeded, build_weights,
                                  ensemble_tree, leaf_counts, leaf_depths, load_ensemble_csv,
                                  nu_cap, run_ensemble, sample_ensemble, sample_nu,
                                  sample_realization, sample_velocity, save_ensemble,
                                  symmetric_tree_picks, tree_scales)
from inelastic_kac.model import (Gaussian, ModelParams, PointMass, Rademacher,
                                 SymmetricPareto, SymmetricStable, kernel_cp, kernel_sp,
                                 symmetrize)
from inelastic_kac.rng import SeededStream
from inelastic_kac.stable import StableSpec, sample_stable
from inelastic_kac.diagnostics import empirical_cf, ks_two_sample


# --- leaf count --------------------------------------------------------------

def test_nu_at_time_zero():
    assert all(sample_nu(0.0, SeededStream(1, i)) == 1 for i in range(50))
    assert nu_cap(0.0) == 1


def test_nu_law_at_log2():
    nus, caps = leaf_counts(math.log(2.0), 10 ** 6, 17)
    n = nus.size
    for k, prob in [(1, 0.5), (2, 0.25)]:
        freq = np.mean(nus == k)
        assert abs(freq - prob) < 3 * math.sqrt(prob * (1 - prob) / n)
    assert caps.sum() == 0


def test_nu_mean_at_t2():
    nus, _ = leaf_counts(2.0, 10 ** 6, 18)
    mean = math.exp(2.0)
    sd = math.sqrt((1 - math.exp(-2.0)) / math.exp(-4.0))
    assert abs(nus.mean() - mean) < 3 * sd / math.sqrt(nus.size)


def test_scalar_nu_matches_kernel():
    nus, _ = leaf_counts(1.3, 200, 5)
    assert [sample_nu(1.3, SeededStream(5, i)) for i in range(200)] == nus.tolist()


def test_nu_cap_value_and_signal():
    t = 3.0
    cap = nu_cap(t)
    assert (1 - math.exp(-t)) ** cap < 1e-12 <= (1 - math.exp(-t)) ** (cap - 1)
    with pytest.raises(CappedDraw):
        for i in range(10000):
            sample_nu(t, SeededStream(2, i), cap=3)


def test_capped_draws_are_counted():
    # the ensemble reports exactly the cap events of its own streams
    nus, caps = leaf_counts(6.0, 20000, 9)
    assert nus.max() <= nu_cap(6.0)
    ens = run_ensemble(ModelParams(1.0), Rademacher(1.0), 6.0, 2000, 9)
    assert ens.cap_events == int(caps[:2000].sum())


# --- weights -----------------------------------------------------------------

def test_build_weights_examples():
    np.testing.assert_array_equal(build_weights(ModelParams(1.0), [], []), [1.0])
    np.testing.assert_allclose(build_weights(ModelParams(1.0), [math.pi / 4], [1]), [0.5, 0.5],
                               atol=1e-15)


def test_build_weights_insertion_order():
    p = ModelParams(0.0)
    w = build_weights(p, [0.3, 1.1], [1, 1])
    c1, s1 = math.cos(0.3), math.sin(0.3)
    c2, s2 = math.cos(1.1), math.sin(1.1)
    np.testing.assert_allclose(w, [c2 * c1, s2 * c1, s1], atol=1e-15)
    w = build_weights(p, [0.3, 1.1], [1, 2])
    np.testing.assert_allclose(w, [c1, c2 * s1, s2 * s1], atol=1e-15)


@pytest.mark.parametrize("picks", [[0], [2], [1, 3], [1.0]])
def test_build_weights_rejects_bad_picks(picks):
    with pytest.raises(ValueError):
        build_weights(ModelParams(1.0), [0.1] * len(picks), picks)


@settings(max_examples=100, deadline=None)
@given(st.sampled_from([0.0, 0.5, 1.0, 3.0, 7.3]),
       st.lists(st.tuples(st.floats(0.0, 2 * math.pi), st.floats(0.0, 0.999999)),
                min_size=0, max_size=40))
def test_weights_alpha_mass_property(p, steps):
    thetas = [s[0] for s in steps]
    picks = [int(u * k) + 1 for k, (_, u) in enumerate(steps, start=1)]
    w = build_weights(ModelParams(p), thetas, picks)
    assert len(w) == len(steps) + 1
    assert abs(np.sum(np.abs(w) ** ModelParams(p).alpha) - 1.0) < 1e-12
    assert np.all(np.abs(w) <= 1.0)


def test_symmetric_tree_examples():
    assert symmetric_tree_picks(1, 0) == [1]
    picks = symmetric_tree_picks(2, 0)
    assert len(picks) == 3 and leaf_depths(picks) == [2, 2, 2, 2]
    picks = symmetric_tree_picks(2, 1)
    assert len(picks) == 5
    assert leaf_depths(picks) == [3, 3, 2, 2, 3, 3]
    for bad in [(0, 0), (2, 2), (3, -1), (1.5, 0)]:
        with pytest.raises(ValueError):
            symmetric_tree_picks(*bad)


@pytest.mark.parametrize("p", [0.0, 0.5, 1.0, 3.0])
def test_complete_tree_uniform_weights(p):
    prm = ModelParams(p)
    for m in range(1, 11):
        picks = symmetric_tree_picks(m, 0)
        w = build_weights(prm, [math.pi / 4] * len(picks), picks)
        np.testing.assert_allclose(w, 2.0 ** (-m / prm.alpha), rtol=0, atol=1e-12)


def test_symmetric_tree_with_cherries_structure():
    m, k = 3, 2
    picks = symmetric_tree_picks(m, k)
    assert len(picks) == 2 ** m + 2 * k - 1
    d = leaf_depths(picks)
    assert d == [4, 4, 4, 4, 3, 3, 3, 3, 4, 4, 4, 4]


def test_realization_consistency():
    prm = ModelParams(0.5)
    r = sample_realization(prm, 2.0, SeededStream(4, 2))
    assert len(r.weights) == r.nu
    np.testing.assert_allclose(r.weights, build_weights(prm, r.thetas, r.picks.tolist()))
    assert abs(r.alpha_mass(prm.alpha) - 1.0) < 1e-12


@pytest.mark.parametrize("p", [0.0, 0.5, 1.0, 3.0])
def test_kernel_trees_normalized(p):
    prm = ModelParams(p)
    s = tree_scales(prm, 3.0, 20000, 8, prm.alpha)
    assert np.max(np.abs(s ** prm.alpha - 1.0)) < 1e-9
    w = ensemble_tree(prm, 3.0, 8, 5)
    assert abs(np.sum(np.abs(w) ** prm.alpha) - 1.0) < 1e-12
    assert tree_scales(prm, 3.0, 6, 8, 1.0)[5] == pytest.approx(np.sum(np.abs(w)), rel=1e-12)


# --- velocities --------------------------------------------------------------

def test_time_zero_returns_initial_draws():
    v = sample_ensemble(ModelParams(1.0), Rademacher(2.0), 0.0, 1000, 3)
    assert set(np.unique(v)) == {-2.0, 2.0}
    g = sample_ensemble(ModelParams(1.0), Gaussian(1.0), 0.0, 20000, 3)
    ref = sample_stable(StableSpec(2.0, 0.5), 20000, 99)
    assert ks_two_sample(g, ref)[1] > 1e-3


def test_elastic_energy_rademacher():
    v = sample_ensemble(ModelParams(0.0), Rademacher(1.0), 3.0, 100000, 21)
    assert abs(np.mean(v ** 2) - 1.0) < 0.02


def test_elastic_variance_gaussian():
    v = sample_ensemble(ModelParams(0.0), Gaussian(1.0), 5.0, 100000, 22)
    assert abs(np.var(v) - 1.0) < 0.03


def test_cauchy_is_stationary():
    v = sample_ensemble(ModelParams(1.0), SymmetricStable(1.0, 1.0), 2.0, 50000, 23)
    ref = sample_stable(StableSpec(1.0, 1.0), 50000, 77)
    assert ks_two_sample(v, ref)[1] > 1e-3


@pytest.mark.parametrize("t", [1.0, 5.0])
def test_stable_cf_stationary(t):
    prm = ModelParams(3.0)
    v = sample_ensemble(prm, SymmetricStable(0.5, 1.0), t, 40000, 24)
    xi = np.linspace(0, 4, 17)
    err = np.abs(empirical_cf(v, xi) - np.exp(-np.abs(xi) ** 0.5))
    assert err.max() < 4 / math.sqrt(v.size)


def test_conditioned_on_two_leaves_matches_quadrature():
    # nu = 2 draws are c_p(theta) X1 + s_p(theta) X2; their cf is q2
    p, t, n = 0.5, math.log(2.0), 200000
    prm = ModelParams(p)
    ens = run_ensemble(prm, Rademacher(1.0), t, n, 41)
    nus, _ = leaf_counts(t, n, 41)
    v = ens.values[nus == 2]
    xi = np.linspace(0.4, 4.0, 10)

    def q2(x):
        f = lambda th: math.cos(x * kernel_cp(p, th)) * math.cos(x * kernel_sp(p, th))
        return integrate.quad(f, 0, 2 * math.pi, limit=200)[0] / (2 * math.pi)

    want = np.array([q2(x) for x in xi])
    got = empirical_cf(v, xi).real
    assert np.max(np.abs(got - want)) < 4 / math.sqrt(v.size)


def test_asymmetric_law_and_symmetrized_law():
    prm = ModelParams(1.0)
    v = sample_ensemble(prm, PointMass(1.0), 0.0, 100, 1)
    np.testing.assert_array_equal(v, 1.0)
    v = sample_ensemble(prm, symmetrize(PointMass(1.0)), 0.0, 10000, 1)
    assert set(np.unique(v)) == {-1.0, 1.0}


def test_determinism_and_workers(monkeypatch):
    prm, law = ModelParams(1.0), SymmetricPareto(1.0, 1.0)
    a = run_ensemble(prm, law, 3.0, 5000, 1234, workers=1)
    b = run_ensemble(prm, law, 3.0, 5000, 1234, workers=3)
    monkeypatch.setenv("KAC_WORKERS", "4")
    c = run_ensemble(prm, law, 3.0, 5000, 1234)
    np.testing.assert_array_equal(a.values, b.values)
    np.testing.assert_array_equal(a.values, c.values)
    assert a.leaves == b.leaves == c.leaves
    d = run_ensemble(prm, law, 3.0, 5000, 1235)
    assert not np.array_equal(a.values, d.values)


def test_single_draw_matches_ensemble():
    prm, law = ModelParams(0.5), Gaussian(1.0)
    ens = sample_ensemble(prm, law, 2.0, 10, 77)
    assert ens[0] == sample_velocity(prm, law, 2.0, SeededStream(77, 0))
    assert ens[7] == sample_velocity(prm, law, 2.0, SeededStream(77, 7))
    assert sample_ensemble(prm, law, 2.0, 1, 77)[0] == ens[0]


def test_work_guard():
    with pytest.raises(WorkLimitExceeded):
        run_ensemble(ModelParams(1.0), Gaussian(1.0), 30.0, 10 ** 6, 1)


def test_persistence(tmp_path):
    ens = run_ensemble(ModelParams(1.0), Gaussian(1.0), 1.0, 500, 5)
    save_ensemble(ens, tmp_path / "e.csv", tmp_path / "e.json")
    np.testing.assert_array_equal(load_ensemble_csv(tmp_path / "e.csv"), ens.values)
    side = json.loads((tmp_path / "e.json").read_text())
    assert side["seed"] == 5 and side["n"] == 500 and side["cap_events"] == ens.cap_events
    assert side["law"] == {"family": "gaussian", "sigma": 1.0}
    assert (tmp_path / "e.csv").read_text().splitlines()[0] == "v"
