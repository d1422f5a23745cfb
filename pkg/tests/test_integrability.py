import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate as sint
from scipy import special

from corm.core import BaseMeasure, CormSpec, build_directing_measure, build_marginal, build_score_model
from corm.errors import InvalidIndex, UnsupportedFamily
from corm.integrability import (
    Posedness,
    Status,
    analytic_verdict_stable,
    check_condition_6,
    check_condition_7,
    check_corm,
    check_marginal,
    check_shortcut_10,
    check_shortcut_11,
    direct_multivariate_check,
    marginal_levy_integral,
)
from corm.quad import Verdict

BASE = BaseMeasure()


def stable(sigma):
    return build_directing_measure("sigma_stable", sigma=sigma)


def test_gamma_low_shape_is_ill_posed():
    v = check_marginal(build_marginal("gamma", shape=0.3, rate=1.0), stable(0.4), BASE)
    assert v.overall is Posedness.ILL_POSED
    assert v.cond_7.verdict is Verdict.DIVERGENT
    assert v.cond_6.verdict is Verdict.CONVERGENT
    assert v.shortcut_11.status is Status.FAILS
    assert v.analytic is Posedness.ILL_POSED


def test_gamma_high_shape_is_well_posed():
    v = check_marginal(build_marginal("gamma", shape=1.5, rate=2.0), stable(0.4), BASE)
    assert v.overall is Posedness.WELL_POSED
    assert v.shortcut_10.status is Status.HOLDS
    assert v.shortcut_11.status is Status.HOLDS


def test_beta_examples():
    assert check_marginal(build_marginal("beta", alpha=0.5, beta=2.0), stable(0.4), BASE).overall is Posedness.ILL_POSED
    assert check_marginal(build_marginal("beta", alpha=1.0, beta=1.0), stable(0.5), BASE).overall is Posedness.WELL_POSED


def test_analytic_verdict_table():
    assert analytic_verdict_stable("gamma", 0.3, 0.4) is Posedness.ILL_POSED
    assert analytic_verdict_stable("beta", 0.8, 0.5) is Posedness.WELL_POSED
    assert analytic_verdict_stable("gamma", 0.6, 0.4) is Posedness.BOUNDARY
    with pytest.raises(UnsupportedFamily):
        analytic_verdict_stable("exponential", 1.0, 0.5)
    with pytest.raises(InvalidIndex):
        analytic_verdict_stable("gamma", 1.0, 1.0)


def test_condition_7_reduced_form():
    # int_1^inf H(1/z) z sigma z^(-1-sigma) dz = sigma/(1-sigma) int_0^1 h(s) (s^(sigma-1) - 1) ds
    a, sigma = 1.4, 0.3
    m = build_marginal("gamma", shape=a, rate=1.0)
    val = check_condition_7(m, stable(sigma), BASE).value
    ref, _ = sint.quad(lambda s: float(m.pdf(s)) * (s ** (sigma - 1) - 1), 0, 1, limit=200)
    assert val == pytest.approx(sigma / (1 - sigma) * ref, rel=1e-7)


def test_condition_6_against_scipy():
    m = build_marginal("gamma", shape=2.0, rate=1.0)
    dm = stable(0.5)
    ours = check_condition_6(m, dm, BASE).value
    ref, _ = sint.quad(lambda z: float(m.sf(1 / z)) * float(dm.density(z)), 0, 1, limit=200)
    assert ours == pytest.approx(ref, rel=1e-7)


@given(mass=st.floats(min_value=0.1, max_value=20.0))
def test_conditions_scale_with_total_mass(mass):
    m = build_marginal("gamma", shape=2.0, rate=1.0)
    dm = stable(0.5)
    one = check_condition_7(m, dm, BASE).value
    scaled = check_condition_7(m, dm, BaseMeasure(total_mass=mass)).value
    assert scaled == pytest.approx(mass * one, rel=1e-12)


def test_levy_integral_stable_closed_form():
    # int min(1, z s) sigma z^(-1-sigma) dz = s^sigma / (1-sigma), so nu_j gives E[S^sigma]/(1-sigma)
    m = build_marginal("gamma", shape=0.3, rate=1.0)
    sigma = 0.4
    res = marginal_levy_integral(m, stable(sigma), BASE)
    assert res.value == pytest.approx(m.fractional_moment(sigma) / (1 - sigma), rel=1e-7)


def test_levy_integral_gamma_process_closed_form():
    m = build_marginal("exponential")
    # Phi(r) = r (1 - e^(-1/r)) + E1(1/r) for the gamma process
    phi = lambda r: r * (1 - math.exp(-1 / r)) + special.exp1(1 / r)
    ref, _ = sint.quad(lambda s: math.exp(-s) * phi(s), 0, np.inf, limit=200)
    assert marginal_levy_integral(m, build_directing_measure("gamma_process"), BASE).value == pytest.approx(ref, rel=1e-7)


@pytest.mark.parametrize(
    "score, expected",
    [
        (build_marginal("gamma", shape=2.0, rate=1.0), Status.HOLDS),
        (build_marginal("gamma", shape=0.5, rate=1.0), Status.FAILS),
        (build_marginal("beta", alpha=1.0, beta=3.0), Status.HOLDS),
        (build_marginal("beta", alpha=0.5, beta=0.5), Status.FAILS),
        (build_marginal("exponential", rate=2.0), Status.HOLDS),
    ],
)
def test_shortcut_11(score, expected):
    assert check_shortcut_11(score).status is expected


def test_shortcut_10_heavy_tail_fails():
    from corm.core import custom_marginal

    # Pareto(1): h(1/z)/z^2 = 1 exactly, inside the undecidable band
    pareto = custom_marginal(lambda s: np.where(s > 1, 1.0 / s**2, 0.0), lambda s: np.where(s > 1, 1 - 1 / s, 0.0))
    assert check_shortcut_10(pareto).status is Status.INCONCLUSIVE
    # Pareto with scale 2: the limit is 2
    pareto2 = custom_marginal(lambda s: np.where(s > 2, 2.0 / s**2, 0.0), lambda s: np.where(s > 2, 1 - 2 / s, 0.0))
    assert check_shortcut_10(pareto2).status is Status.FAILS
    assert check_shortcut_10(build_marginal("gamma", shape=3.0)).status is Status.HOLDS


def test_check_corm_combines_marginals():
    ok = build_marginal("gamma", shape=2.0, rate=1.0)
    bad = build_marginal("gamma", shape=0.2, rate=1.0)
    spec = CormSpec(build_score_model([ok, bad]), stable(0.5))
    v = check_corm(spec, direct=False)
    assert [m.overall for m in v.marginals] == [Posedness.WELL_POSED, Posedness.ILL_POSED]
    assert v.multivariate is Posedness.ILL_POSED
    assert v.marginals[1].j == 1


def _norm_moment_oracle(sigma, a=1.0, b=1.0):
    h = lambda s: s ** (a - 1) * math.exp(-b * s) * b**a / math.gamma(a)
    val, _ = sint.dblquad(lambda x, y: math.hypot(x, y) ** sigma * h(x) * h(y), 0, np.inf, 0, np.inf, epsabs=1e-12, epsrel=1e-10)
    return val


@pytest.mark.parametrize("sigma", [0.3, 0.6])
def test_direct_multivariate_value_for_stable(sigma):
    # int rho(dz) E[min(1, z ||S||)] = E[||S||^sigma] / (1 - sigma)
    m = build_marginal("gamma", shape=2.0, rate=1.0)
    spec = CormSpec(build_score_model([m, m]), stable(sigma))
    levy = [marginal_levy_integral(m, spec.directing, BASE).value] * 2
    chk = direct_multivariate_check(spec, levy)
    expected = _norm_moment_oracle(sigma, a=2.0) / (1 - sigma)
    assert chk.result.verdict is Verdict.CONVERGENT
    assert chk.result.value == pytest.approx(expected, rel=1e-4)
    assert chk.bound_ok


def test_direct_check_d1_equals_marginal():
    m = build_marginal("gamma", shape=0.4, rate=1.0)
    spec = CormSpec(build_score_model([m]), stable(0.4))
    v = check_corm(spec)
    assert v.direct.result.value == pytest.approx(v.marginals[0].levy_integral.value, rel=1e-5)
    assert v.direct.result.value == pytest.approx(math.gamma(0.8) / math.gamma(0.4) / 0.6, rel=1e-5)


@given(
    shapes=st.lists(st.floats(min_value=1.0, max_value=4.0), min_size=2, max_size=3),
    family=st.sampled_from(["sigma_stable", "gamma_process", "finite_exponential"]),
)
def test_direct_check_respects_sqrt_d_bound(shapes, family):
    dm = build_directing_measure(family, **({"sigma": 0.5} if family == "sigma_stable" else {}))
    spec = CormSpec(build_score_model([build_marginal("gamma", shape=a, rate=1.0) for a in shapes]), dm)
    v = check_corm(spec)
    assert v.multivariate is Posedness.WELL_POSED
    assert v.direct.result.verdict is Verdict.CONVERGENT
    assert v.direct.result.value <= v.direct.bound * 1.01


def test_verdict_serializes():
    v = check_corm(CormSpec(build_score_model([build_marginal("exponential")]), stable(0.5)))
    d = v.to_dict()
    assert d["multivariate"] == "WellPosed"
    assert d["marginals"][0]["cond_7"]["verdict"] == "Convergent"


def test_condition_6_gamma_matches_substituted_form():
    m = build_marginal("gamma", shape=1.0, rate=1.0)
    res = check_condition_6(m, stable(0.5), BASE)
    ref, _ = sint.quad(lambda s: math.exp(-s) * (s**0.5 - 1), 1, np.inf)
    assert res.verdict is Verdict.CONVERGENT
    assert res.value == pytest.approx(ref, rel=1e-8)


@pytest.mark.parametrize("sigma", [0.2, 0.5, 0.9])
def test_condition_6_vanishes_for_beta(sigma):
    res = check_condition_6(build_marginal("beta", alpha=0.7, beta=2.0), stable(sigma), BASE)
    assert res.verdict is Verdict.CONVERGENT
    assert res.value == 0.0


def test_condition_6_exponential_finite_directing():
    res = check_condition_6(build_marginal("exponential"), build_directing_measure("finite_exponential"), BASE)
    assert res.verdict is Verdict.CONVERGENT


@pytest.mark.parametrize(
    "score, sigma, verdict",
    [
        (build_marginal("gamma", shape=0.3, rate=1.0), 0.4, Verdict.DIVERGENT),
        (build_marginal("gamma", shape=1.0, rate=1.0), 0.5, Verdict.CONVERGENT),
        (build_marginal("beta", alpha=0.2, beta=1.0), 0.3, Verdict.DIVERGENT),
    ],
)
def test_condition_7_examples(score, sigma, verdict):
    assert check_condition_7(score, stable(sigma), BASE).verdict is verdict


def test_shortcut_10_limits_for_named_families():
    from corm.core import custom_marginal

    for m in (build_marginal("gamma", shape=0.4, rate=3.0), build_marginal("beta", alpha=0.5, beta=0.5)):
        r = check_shortcut_10(m)
        assert r.status is Status.HOLDS and r.limit == 0.0
    cubic = custom_marginal(lambda s: np.where(s > 1, 2.0 / s**3, 0.0), lambda s: np.where(s > 1, 1 - 1 / s**2, 0.0))
    r = check_shortcut_10(cubic)
    assert r.status is Status.HOLDS
    assert r.limit == pytest.approx(0.0, abs=1e-15)


def test_beta_above_boundary_well_posed_with_reduced_integral():
    m = build_marginal("beta", alpha=0.5, beta=2.0)
    sigma = 0.6
    v = check_marginal(m, stable(sigma), BASE)
    assert v.overall is Posedness.WELL_POSED
    ref, _ = sint.quad(lambda s: float(m.pdf(s)) * (s ** (sigma - 1) - 1), 0, 1, limit=200)
    assert v.cond_7.value == pytest.approx(sigma / (1 - sigma) * ref, rel=1e-7)


def test_bivariate_examples():
    g11 = build_marginal("gamma", shape=1.0, rate=1.0)
    assert check_corm(CormSpec(build_score_model([g11, g11]), stable(0.5))).multivariate is Posedness.WELL_POSED
    g02 = build_marginal("gamma", shape=0.2, rate=1.0)
    assert check_corm(CormSpec(build_score_model([g11, g02]), stable(0.3)), direct=False).multivariate is Posedness.ILL_POSED


@given(a=st.floats(min_value=0.1, max_value=2.0), sigma=st.floats(min_value=0.1, max_value=0.9))
def test_overall_is_conjunction_of_conditions(a, sigma):
    v = check_marginal(build_marginal("gamma", shape=a, rate=1.0), stable(sigma), BASE, levy=False)
    both = v.cond_6.verdict is Verdict.CONVERGENT and v.cond_7.verdict is Verdict.CONVERGENT
    assert (v.overall is Posedness.WELL_POSED) == both
