import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from inelastic_kac.model import (Empirical, Gaussian, ModelParams, Rademacher, PointMass,
                                 SymmetricPareto, SymmetricStable, alpha_of, kernel_cp,
                                 kernel_sp, law_from_config, symmetrize, wrap_angle)
from inelastic_kac.rng import SeededStream

ALL_LAWS = [Rademacher(1.0), Rademacher(2.5), Gaussian(1.0), Gaussian(0.3),
            SymmetricStable(0.6, 1.0), SymmetricStable(1.0, 2.0), SymmetricStable(2.0, 0.5),
            SymmetricPareto(1.0, 1.0), SymmetricPareto(1.5, 2.0), PointMass(1.0),
            PointMass(0.0), Empirical([0.3, -1.2, 2.0, 5.0])]


@pytest.mark.parametrize("p,theta,want", [(1, math.pi / 4, 0.5), (0, math.pi / 3, 0.5),
                                          (2, math.pi / 2, 0.0)])
def test_kernel_cp_examples(p, theta, want):
    assert kernel_cp(p, theta) == pytest.approx(want, abs=1e-15)


@pytest.mark.parametrize("p,theta,want", [(1, math.pi / 4, 0.5), (0, math.pi, 0.0),
                                          (3, 3 * math.pi / 2, -1.0)])
def test_kernel_sp_examples(p, theta, want):
    assert kernel_sp(p, theta) == pytest.approx(want, abs=1e-15)


@pytest.mark.parametrize("p,want", [(0, 2.0), (1, 1.0), (3, 0.5)])
def test_alpha_of(p, want):
    assert alpha_of(p) == want
    assert ModelParams(p).alpha == want
    assert ModelParams(p).elastic == (p == 0)


def test_negative_p_rejected():
    with pytest.raises(ValueError):
        alpha_of(-0.1)
    with pytest.raises(ValueError):
        ModelParams(-1.0)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, 20.0), st.floats(-10.0, 10.0))
def test_alpha_mass_identity(p, theta):
    a = alpha_of(p)
    c, s = kernel_cp(p, theta), kernel_sp(p, theta)
    assert abs(abs(c) ** a + abs(s) ** a - 1.0) < 1e-12
    assert abs(c) <= 1.0 and abs(s) <= 1.0


def test_kernels_flip_sign_over_half_turn():
    th = np.linspace(0.01, 3.1, 50)
    for p in (0.0, 0.7, 3.0):
        np.testing.assert_allclose(kernel_cp(p, th + math.pi), -kernel_cp(p, th), atol=1e-15)
        np.testing.assert_allclose(kernel_sp(p, th + math.pi), -kernel_sp(p, th), atol=1e-15)
        # odd about pi/2
        np.testing.assert_allclose(kernel_cp(p, math.pi / 2 + th / 2),
                                   -kernel_cp(p, math.pi / 2 - th / 2), atol=1e-15)


def test_angle_wrapping():
    assert wrap_angle(0.0) == 2 * math.pi
    assert wrap_angle(2 * math.pi) == 2 * math.pi
    assert 0 < wrap_angle(-1.0) <= 2 * math.pi


@pytest.mark.parametrize("law", ALL_LAWS, ids=repr)
def test_cf_invariants(law):
    xi = np.linspace(0.0, 10.0, 41)
    v = law.cf(xi)
    assert abs(v[0] - 1.0) < 1e-14
    assert np.all(np.abs(v) <= 1.0 + 1e-12)
    np.testing.assert_allclose(law.cf(-xi), np.conj(v), atol=1e-14)
    if law.symmetric:
        assert np.all(np.abs(v.imag) < 1e-14)


def test_symmetrize_examples():
    s = symmetrize(PointMass(1.0))
    xi = np.linspace(0, 6, 13)
    np.testing.assert_allclose(s.cf(xi), np.cos(xi), atol=1e-15)
    np.testing.assert_array_equal(s.tail(np.array([0.5, 0.99, 1.0, 3.0])), [0.5, 0.5, 0.0, 0.0])
    g = symmetrize(Gaussian(1.3))
    np.testing.assert_array_equal(g.cf(xi), Gaussian(1.3).cf(xi))
    x = np.array([1.0, 2.0, 10.0, 1e4])
    np.testing.assert_allclose(symmetrize(SymmetricPareto(1.0, 1.0)).tail(x), 0.5 / x, rtol=1e-15)


@pytest.mark.parametrize("law", ALL_LAWS, ids=repr)
def test_symmetrize_idempotent_and_real_part(law):
    xi = np.linspace(-5, 5, 21)
    s1, s2 = symmetrize(law), symmetrize(symmetrize(law))
    np.testing.assert_allclose(s2.cf(xi), s1.cf(xi), atol=1e-14)
    np.testing.assert_array_equal(s1.cf(xi), np.real(law.cf(xi)))


@pytest.mark.parametrize("law", [Gaussian(1.0), SymmetricPareto(1.0, 1.0), Rademacher(2.0),
                                 SymmetricStable(1.5, 1.0)], ids=repr)
def test_cdf_symmetry(law):
    s = symmetrize(law)
    x = np.array([0.3, 1.7, 2.5, 10.0])
    np.testing.assert_allclose(s.cdf(x) + s.cdf(-x), 1.0, atol=1e-15)


def test_pareto_cf_against_quadrature():
    # cf = int_x0^inf alpha0 x0**alpha0 x**(-alpha0 - 1) cos(xi x) dx
    for a0, x0 in [(1.5, 2.0), (0.7, 1.0), (1.0, 1.0)]:
        law = SymmetricPareto(a0, x0)
        for xi in (0.3, 1.0, 2.7):
            f = lambda x: a0 * x0 ** a0 * x ** (-a0 - 1.0)
            val, _ = integrate.quad(f, x0, np.inf, weight="cos", wvar=xi)
            assert law.cf(xi).real == pytest.approx(val, abs=1e-8)


def test_pareto_has_no_core():
    law = SymmetricPareto(1.0, 1.0)
    assert law.core_mass == 0.0
    assert law.tail(1.0) == 0.5


@pytest.mark.parametrize("law", [Gaussian(1.0), SymmetricPareto(1.0, 1.0), Rademacher(1.0),
                                 SymmetricStable(0.6, 1.0), SymmetricStable(2.0, 0.5),
                                 SymmetricPareto(1.5, 2.0)], ids=repr)
def test_sampler_tails_match_analytic(law):
    n = 200000
    x = law.sample(n, SeededStream(31, 0))
    for q in (0.5, 1.0, 2.0, 5.0):
        want = 2 * float(law.tail(q))
        got = np.mean(np.abs(x) > q)
        assert abs(got - want) < 5 * math.sqrt(want * (1 - want) / n) + 1e-12


def test_symmetrized_sampler():
    x = symmetrize(PointMass(2.0)).sample(100000, SeededStream(3, 1))
    assert set(np.unique(x)) == {-2.0, 2.0}
    assert abs(np.mean(x > 0) - 0.5) < 0.01


def test_stable_tail_series_branch():
    law = SymmetricStable(1.0, 1.0)
    x = np.array([2.0, 50.0, 1e3])
    np.testing.assert_allclose(law.tail(x), 0.5 - np.arctan(x) / np.pi, rtol=1e-9)
    for a in (0.6, 1.5):
        s = SymmetricStable(a, 1.0)
        # next term of the expansion is O(x**-alpha) relative
        assert float(s.tail(1e6)) * 1e6 ** a == pytest.approx(s.tail_constant(), rel=1e-3)


def test_law_from_config(tmp_path):
    assert law_from_config({"family": "pareto", "alpha0": 1, "x0": 1}) == SymmetricPareto(1.0, 1.0)
    assert law_from_config({"family": "gaussian", "sigma": 2}) == Gaussian(2.0)
    path = tmp_path / "data.csv"
    path.write_text("1.0\n-2.0\n3.5\n")
    law = law_from_config({"family": "empirical", "path": str(path)})
    np.testing.assert_array_equal(law.samples, [1.0, -2.0, 3.5])
    with pytest.raises(ValueError):
        law_from_config({"family": "gaussian", "sigma": 1, "mu": 0})
    with pytest.raises(ValueError):
        law_from_config({"family": "laplace"})
    with pytest.raises(ValueError):
        law_from_config({"family": "gaussian", "sigma": -1})


def test_config_round_trip():
    for law in ALL_LAWS[:-1]:
        assert law_from_config(law.to_config()) == law


def test_empirical_cf_and_tail():
    law = Empirical([1.0, -1.0])
    xi = np.linspace(0, 5, 11)
    np.testing.assert_allclose(law.cf(xi), np.cos(xi), atol=1e-15)
    assert float(law.tail(0.5)) == 0.5 and float(law.tail(1.0)) == 0.0
