import csv
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate as sint
from scipy import special

from corm.core import build_directing_measure
from corm.expcorm import (
    ANALYTIC_DERIVATIVES,
    ExpCormIntensity,
    closed_form_stable_intensity,
    f_exp,
    intensity_direct,
    intensity_via_derivative,
    random_points,
    verify_theorem4,
)
from corm.quad import QuadConfig, integrate

FAMILIES = [
    ("sigma_stable", {"sigma": 0.35}),
    ("sigma_stable_normalized", {"sigma": 0.5}),
    ("gamma_process", {}),
    ("finite_exponential", {}),
]


def dm_of(name, kw):
    return build_directing_measure(name, **kw)


def kv_integral(nu, x):
    # the integrand is below 1e-300 well before t = 20 for x >= 0.3
    val, _ = sint.quad(lambda t: math.exp(-x * math.cosh(t)) * math.cosh(nu * t), 0, 20, limit=200, epsabs=0, epsrel=1e-12)
    return val


@pytest.mark.parametrize("nu", [0, 1, 2, 3, 5])
@pytest.mark.parametrize("x", [0.3, 2.0, 7.5])
def test_bessel_k_against_integral_representation(nu, x):
    assert special.kv(nu, x) == pytest.approx(kv_integral(nu, x), rel=1e-10)


@pytest.mark.parametrize("s", [0.2, 1.0, 3.0])
def test_f_exp_closed_forms(s):
    sigma = 0.5
    stable = dm_of("sigma_stable_normalized", {"sigma": sigma})
    assert f_exp(stable, s) == pytest.approx(sigma * math.gamma(1 + sigma) / (math.gamma(1 - sigma) * s ** (1 + sigma)), rel=1e-9)
    fe = dm_of("finite_exponential", {})
    assert f_exp(fe, s) == pytest.approx(2 * special.kv(0, 2 * math.sqrt(s)), rel=1e-9)
    gp = dm_of("gamma_process", {})
    assert f_exp(gp, s) == pytest.approx(2 / math.sqrt(s) * special.kv(1, 2 * math.sqrt(s)), rel=1e-9)


@pytest.mark.parametrize("name, kw", FAMILIES)
def test_f_exp_positive_decreasing_convex(name, kw):
    dm = dm_of(name, kw)
    s = np.linspace(0.1, 6.0, 30)
    v = np.array([f_exp(dm, x) for x in s])
    assert np.all(v > 0)
    assert np.all(np.diff(v) < 0)
    assert np.all(np.diff(v, 2) > 0)


def test_direct_d1_is_f():
    dm = dm_of("gamma_process", {})
    assert intensity_direct(dm, [0.7]) == f_exp(dm, 0.7)


def test_direct_bivariate_stable_example():
    dm = dm_of("sigma_stable_normalized", {"sigma": 0.5})
    assert intensity_direct(dm, [0.5, 0.5]) == pytest.approx(0.5 * math.gamma(2.5) / math.gamma(0.5), rel=1e-9)


def test_direct_trivariate_finite_exponential_example():
    dm = dm_of("finite_exponential", {})
    assert intensity_direct(dm, [0.2, 0.3, 0.5]) == pytest.approx(2 * special.kv(2, 2.0), rel=1e-9)


def test_derivative_examples():
    stable = dm_of("sigma_stable_normalized", {"sigma": 0.3})
    S = 1.7
    assert intensity_via_derivative(stable, [0.9, 0.8]) == pytest.approx(0.3 * math.gamma(2.3) / math.gamma(0.7) * S**-2.3, rel=1e-12)
    fe = dm_of("finite_exponential", {})
    assert intensity_via_derivative(fe, [0.9, 0.8]) == pytest.approx(2 * special.kv(1, 2 * math.sqrt(S)) / math.sqrt(S), rel=1e-12)
    assert intensity_via_derivative(fe, [0.4]) == pytest.approx(f_exp(fe, 0.4), rel=1e-12)


@pytest.mark.parametrize("name, kw", FAMILIES)
def test_numeric_path_agrees_with_analytic(name, kw):
    dm = dm_of(name, kw)
    for d in (2, 3, 4):
        s = np.full(d, 0.4)
        num = intensity_via_derivative(dm, s, analytic=False)
        assert num == pytest.approx(intensity_direct(dm, s), rel=1e-6)


@given(
    pair=st.sampled_from(FAMILIES),
    s=st.lists(st.floats(min_value=0.05, max_value=3.0), min_size=2, max_size=4),
    seed=st.integers(0, 1000),
)
def test_symmetry_and_positivity(pair, s, seed):
    dm = dm_of(*pair)
    perm = np.random.default_rng(seed).permutation(len(s))
    a = intensity_direct(dm, s)
    b = intensity_direct(dm, np.asarray(s)[perm])
    assert a > 0
    assert b == pytest.approx(a, rel=1e-12)
    assert intensity_via_derivative(dm, s) > 0


@pytest.mark.parametrize("name, kw", FAMILIES)
def test_marginalization_recovers_f(name, kw):
    dm = dm_of(name, kw)
    s1 = 0.6
    outer = QuadConfig(rel_tol=1e-7, nodes=12)
    res = integrate(np.vectorize(lambda s2: intensity_direct(dm, [s1, s2]) if s2 > 0 else 0.0), 0.0, math.inf, outer)
    assert res.value == pytest.approx(f_exp(dm, s1), rel=1e-5)


@pytest.mark.parametrize("name, kw", FAMILIES)
@pytest.mark.parametrize("d", [1, 2, 5, 8])
def test_intensity_finite_for_every_family(name, kw, d):
    v = intensity_direct(dm_of(name, kw), np.full(d, 0.3))
    assert math.isfinite(v) and v > 0


def test_closed_form_stable_intensity():
    dm = dm_of("sigma_stable_normalized", {"sigma": 0.5})
    for d, pts in random_points((2, 3, 4), 5, seed=3).items():
        for s in pts:
            assert closed_form_stable_intensity(dm, s) == pytest.approx(intensity_direct(dm, s), rel=1e-9)
    with pytest.raises(ValueError):
        closed_form_stable_intensity(dm_of("gamma_process", {}), [1.0, 1.0])


def test_registry_covers_analytic_families():
    assert set(ANALYTIC_DERIVATIVES) == {"sigma_stable", "sigma_stable_normalized", "finite_exponential"}
    ei = ExpCormIntensity(dm_of("gamma_process", {}), 2)
    assert ei.analytic_derivative(1, 1.0) is None
    assert ei.via_derivative([0.5, 0.5]) == pytest.approx(ei.direct([0.5, 0.5]), rel=1e-8)


def test_verify_theorem4_report(tmp_path):
    rep = verify_theorem4(dm_of("sigma_stable_normalized", {"sigma": 0.5}), (2, 3, 4))
    assert rep.passed and len(rep.rows) == 60
    assert rep.max_dev <= 1e-5
    rep.raise_if_failed()
    path = tmp_path / "thm4.csv"
    rep.write_csv(path)
    rows = list(csv.reader(open(path)))
    assert rows[0][:5] == ["d", "s_vec", "direct", "derivative", "rel_dev"]
    assert len(rows) == 61


def test_tolerance_zero_always_fails():
    rep = verify_theorem4(dm_of("finite_exponential", {}), (2,), tol=0.0, n_points=3)
    assert not rep.passed
    with pytest.raises(AssertionError):
        rep.raise_if_failed()


def test_d1_always_passes():
    assert verify_theorem4(dm_of("gamma_process", {}), (1,), n_points=5).passed


def test_invalid_points():
    with pytest.raises(ValueError):
        intensity_direct(dm_of("gamma_process", {}), [0.5, -1.0])
    with pytest.raises(ValueError):
        intensity_via_derivative(dm_of("gamma_process", {}), np.full(8, 0.5))
