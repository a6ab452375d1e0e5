import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from neumannsys.errors import DomainError, UsageError
from neumannsys.nonlinearity import (CATALOG, catalog, check_growth_bound, check_hypotheses,
                                     evaluate, from_expression, grad, hessian, resolve)

finite = st.floats(min_value=-30, max_value=30, allow_nan=False)


@pytest.mark.parametrize("name", sorted(CATALOG))
def test_catalog_gradient_matches_central_differences(name, rng):
    nl = catalog(name)
    s, t = rng.uniform(-3, 3, (2, 200))
    h = 1e-6
    fs, ft = nl.grad(s, t)
    np.testing.assert_allclose(fs, (nl.value(s + h, t) - nl.value(s - h, t)) / (2 * h),
                               rtol=1e-6, atol=1e-8)
    np.testing.assert_allclose(ft, (nl.value(s, t + h) - nl.value(s, t - h)) / (2 * h),
                               rtol=1e-6, atol=1e-8)


@pytest.mark.parametrize("name", sorted(CATALOG))
def test_catalog_hessian_matches_gradient_differences(name, rng):
    nl = catalog(name)
    assert nl.analytic_hessian
    s, t = rng.uniform(-3, 3, (2, 200))
    h = 1e-6
    fss, fst, ftt = nl.hess(s, t)
    fs_p, ft_p = nl.grad(s + h, t)
    fs_m, ft_m = nl.grad(s - h, t)
    gs_p, gt_p = nl.grad(s, t + h)
    gs_m, gt_m = nl.grad(s, t - h)
    np.testing.assert_allclose(fss, (fs_p - fs_m) / (2 * h), rtol=1e-5, atol=1e-7)
    np.testing.assert_allclose(fst, (ft_p - ft_m) / (2 * h), rtol=1e-5, atol=1e-7)
    np.testing.assert_allclose(fst, (gs_p - gs_m) / (2 * h), rtol=1e-5, atol=1e-7)
    np.testing.assert_allclose(ftt, (gt_p - gt_m) / (2 * h), rtol=1e-5, atol=1e-7)


def test_log_coupled_closed_form(log_nl):
    s, t = 0.7, -1.3
    q = s * s * t * t
    assert evaluate(log_nl, s, t) == pytest.approx(np.log1p(q), rel=1e-15)
    fs, ft = grad(log_nl, s, t)
    assert fs == pytest.approx(2 * s * t * t / (1 + q), rel=1e-14)
    assert ft == pytest.approx(2 * s * s * t / (1 + q), rel=1e-14)


@settings(max_examples=200)
@given(finite, finite)
def test_log_coupled_subquadratic_bound(s, t):
    # ln(1 + x) <= sqrt(x) and |st| <= (s^2 + t^2)/2
    nl = catalog("log-coupled")
    assert evaluate(nl, s, t) <= 0.5 * (s * s + t * t) * (1 + 1e-12) + 1e-300


def test_expression_matches_catalog(log_nl, rng):
    ex = from_expression("ln(1 + s^2*t^2)")
    s, t = rng.uniform(-4, 4, (2, 100))
    np.testing.assert_allclose(ex.value(s, t), log_nl.value(s, t), rtol=1e-14, atol=1e-15)
    for a, b in zip(ex.grad(s, t), log_nl.grad(s, t)):
        np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-15)
    for a, b in zip(ex.hess(s, t), log_nl.hess(s, t)):
        np.testing.assert_allclose(a, b, rtol=1e-6, atol=1e-8)


def test_resolve_and_unknown_catalog():
    assert resolve("log-coupled").name == "log-coupled"
    assert resolve("s^2*t^2").name == "s^2*t^2"
    with pytest.raises(UsageError):
        catalog("nope")


def test_non_finite_input_rejected(log_nl):
    with pytest.raises(DomainError):
        evaluate(log_nl, np.nan, 1.0)
    with pytest.raises(DomainError):
        grad(log_nl, 1.0, np.inf)
    with pytest.raises(DomainError):
        hessian(log_nl, np.array([1.0, np.nan]), 0.0)


def test_scaled_is_exact(log_nl, rng):
    s, t = rng.uniform(-2, 2, (2, 50))
    two = log_nl.scaled(2.0)
    np.testing.assert_array_equal(two.value(s, t), 2.0 * log_nl.value(s, t))
    for a, b in zip(two.grad(s, t), log_nl.grad(s, t)):
        np.testing.assert_array_equal(a, 2.0 * b)


@pytest.mark.parametrize("name", sorted(CATALOG))
def test_catalog_passes_hypotheses(name):
    rep = check_hypotheses(catalog(name))
    assert rep.passed, rep.failures
    assert rep.verdict == "pass"


def test_log_coupled_bound_estimate(log_nl):
    # max of |F_s|/(|s|+|t|) is finite and below 1 for ln(1+s^2 t^2)
    rep = check_hypotheses(log_nl)
    assert 0.5 < rep.M_estimate < 1.0
    assert rep.f0_profile[0][0] == pytest.approx(1e-4)
    assert rep.f_inf_profile[-1][0] == pytest.approx(1e4)


def test_quadratic_fails_both_limits():
    rep = check_hypotheses(from_expression("s^2+t^2"))
    assert not rep.passed
    assert any(f.startswith("(F_inf)") for f in rep.failures)
    assert any(f.startswith("(F0)") for f in rep.failures)


def test_zero_is_degenerate():
    rep = check_hypotheses(from_expression("0"))
    assert rep.verdict == "fail" and rep.degenerate


def test_negative_f_fails():
    rep = check_hypotheses(from_expression("-ln(1+s^2*t^2)"))
    assert not rep.f_plus_ok and not rep.passed


def test_check_hypotheses_argument_validation(log_nl):
    with pytest.raises(UsageError):
        check_hypotheses(log_nl, radii=[])
    with pytest.raises(UsageError):
        check_hypotheses(log_nl, radii=[2.0, 1.0])
    with pytest.raises(UsageError):
        check_hypotheses(log_nl, angles_per_radius=4)


def test_growth_bound(log_nl):
    ok, c = check_growth_bound(log_nl)
    assert ok and 0 < c < 10
    assert not check_growth_bound(from_expression("s^6 + t^6"))[0]
    with pytest.raises(UsageError):
        check_growth_bound(log_nl, exponent=1.0)
