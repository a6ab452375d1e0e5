import math

import numpy as np
import pytest
from scipy.optimize import brentq

from neumannsys.domain import NormBundle
from neumannsys.errors import DomainError, SearchError
from neumannsys.nonlinearity import CATALOG, catalog, from_expression
from neumannsys.thresholds import (SearchConfig, compute_sF, compute_SF, compute_thresholds,
                                   nelder_mead, ratio_sF, ratio_SF, stationarity_residual)

UNIT = NormBundle.unit()


def _oracle_sF():
    # on the diagonal s = t the ratio is ln(1+x)/sqrt(x), x = s^4;
    # its maximum solves 2x/(1+x) = ln(1+x)
    x = brentq(lambda x: 2 * x / (1 + x) - math.log1p(x), 1.0, 10.0, xtol=1e-15)
    return math.log1p(x) / math.sqrt(x), x ** 0.25


def test_sF_matches_oracle(unit_thresholds):
    value, s_star = _oracle_sF()
    assert unit_thresholds.s_F == pytest.approx(value, rel=1e-9)
    s0, t0 = unit_thresholds.argmax_sF
    assert abs(s0) == pytest.approx(s_star, rel=1e-6)
    assert abs(t0) == pytest.approx(s_star, rel=1e-6)


def test_SF_is_one(unit_thresholds):
    # s F_s + t F_t = 4q/(1+q), q = s^2 t^2, and s^2 + t^2 >= 2 sqrt(q);
    # 2 sqrt(q)/(1+q) peaks at q = 1
    assert unit_thresholds.S_F == pytest.approx(1.0, abs=1e-9)
    s0, t0 = unit_thresholds.argmax_SF
    assert abs(s0) == pytest.approx(1.0, abs=1e-5) and abs(t0) == pytest.approx(1.0, abs=1e-5)


def test_interval_endpoints(unit_thresholds):
    assert unit_thresholds.lambda_lower == pytest.approx(1.0 / unit_thresholds.S_F)
    assert unit_thresholds.lambda_lower <= unit_thresholds.lambda_upper


def test_maximizers_are_sign_symmetric(unit_thresholds):
    pts = {(round(abs(s), 4), round(abs(t), 4)) for s, t in unit_thresholds.maximizers_sF}
    assert len(pts) == 1


def test_ratios_are_even(log_nl, rng):
    for s, t in rng.uniform(-3, 3, (10, 2)):
        r = ratio_sF(log_nl, UNIT, s, t)
        assert ratio_sF(log_nl, UNIT, -s, t) == pytest.approx(r, rel=1e-15)
        assert ratio_SF(log_nl, UNIT, s, -t) == pytest.approx(ratio_SF(log_nl, UNIT, s, t), rel=1e-15)


def test_ratio_rejects_origin(log_nl):
    with pytest.raises(DomainError):
        ratio_sF(log_nl, UNIT, 0.0, 0.0)
    with pytest.raises(DomainError):
        stationarity_residual(log_nl, UNIT, 0.0, 0.0)


@pytest.mark.parametrize("k", [2.0, 0.5])
def test_scaling_with_c(log_nl, k):
    base = compute_thresholds(log_nl, UNIT)
    nb = NormBundle(1.0, 1.0, k, k, k)
    scaled = compute_thresholds(log_nl, nb)
    assert scaled.s_F == pytest.approx(k * base.s_F, rel=1e-9)
    assert scaled.S_F == pytest.approx(k * base.S_F, rel=1e-9)


@pytest.mark.parametrize("name", sorted(CATALOG))
def test_ordering_and_stationarity(name, rng):
    nl = catalog(name)
    for _ in range(3):
        a1, b1, c1 = rng.uniform(0.5, 2, 3)
        nb = NormBundle(a1, b1, c1, c1 / a1 * rng.uniform(1, 2), c1 / b1 * rng.uniform(1, 2))
        rep = compute_thresholds(nl, nb)
        assert rep.S_F >= rep.s_F - 1e-9
        F = float(nl.value(*rep.argmax_sF))
        assert rep.stationarity_residual <= 1e-5 * max(1.0, F)


def test_scaled_F_scales_thresholds(log_nl, unit_thresholds):
    rep = compute_thresholds(log_nl.scaled(2.0), UNIT)
    assert rep.s_F == pytest.approx(2 * unit_thresholds.s_F, rel=1e-9)
    assert rep.S_F == pytest.approx(2 * unit_thresholds.S_F, rel=1e-9)


def test_hypothesis_failure_is_search_error():
    quad = from_expression("s^2 + t^2")
    with pytest.raises(SearchError, match="hypotheses"):
        compute_sF(quad, UNIT)
    with pytest.warns(RuntimeWarning):
        rep = compute_thresholds(quad, UNIT, override=True)
    assert rep.hypotheses_overridden
    assert rep.s_F == pytest.approx(2.0, rel=1e-9)


def test_zero_F_search_error():
    with pytest.raises(SearchError, match="vanished"):
        compute_SF(from_expression("0"), UNIT, check=False)


def test_search_config_validation():
    with pytest.raises(ValueError):
        SearchConfig(r_min=1.0, r_max=0.5)
    with pytest.raises(ValueError):
        SearchConfig(n_angles=4)


def test_deterministic(log_nl):
    a = compute_thresholds(log_nl, UNIT)
    b = compute_thresholds(log_nl, UNIT)
    assert (a.s_F, a.S_F, a.argmax_sF, a.argmax_SF) == (b.s_F, b.S_F, b.argmax_sF, b.argmax_SF)


def test_nelder_mead_quadratic():
    x, f, it, diam = nelder_mead(lambda x: (x[0] - 1) ** 2 + 3 * (x[1] + 2) ** 2,
                                 np.zeros(2), 0.5, rel_tol=1e-10)
    np.testing.assert_allclose(x, [1.0, -2.0], atol=1e-8)
    assert f < 1e-15 and diam <= 1e-9
