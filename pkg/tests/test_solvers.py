import math
import warnings

import numpy as np
import pytest

from neumannsys.discretization import DiscreteSystem, StatePair
from neumannsys.domain import build_coefficients, build_uniform_grid
from neumannsys.errors import DomainError, UsageError
from neumannsys.nonlinearity import from_expression
from neumannsys.solvers import (NEGATIVE, NONNEGATIVE, TRIVIAL, SolveConfig, canonical_order,
                                deflated_search, minimize, newton_solve,
                                nonexistence_certificate, perturbation_stability,
                                random_starts, state_distance, sweep, thresholds_for)


@pytest.fixture(scope="module")
def small():
    g = build_uniform_grid(2, (1.0, 1.0), (9, 9))
    from neumannsys.nonlinearity import catalog_log
    return DiscreteSystem(g, build_coefficients(g), catalog_log(), 1.0)


def _constant_roots(lam):
    # constant states s = t solve s = lam * 2 s^3/(1 + s^4): s^4 - 2 lam s^2 + 1 = 0
    disc = math.sqrt(lam * lam - 1.0)
    return math.sqrt(lam + disc), math.sqrt(lam - disc)


def _constant_energy(lam, s):
    return s * s - lam * math.log1p(s ** 4)


def test_tolerance_floor():
    cfg = SolveConfig()
    assert cfg.tolerance(289) == 1e-10
    assert cfg.tolerance(10 ** 8) == pytest.approx(1e-8)
    assert SolveConfig(grad_tol_rel=1e-6).tolerance(4) == 1e-6


def test_config_validation():
    with pytest.raises(UsageError):
        SolveConfig(grad_tol_abs=0)
    with pytest.raises(UsageError):
        SolveConfig(n_starts=0)


def test_minimize_to_trivial_below_threshold(small, rng):
    sys_ = small.with_lambda(0.5)
    sol = minimize(sys_, rng.normal(size=2 * sys_.n_nodes))
    assert sol.converged and sol.classification == TRIVIAL
    assert np.linalg.norm(sol.state.flat()) < 1e-8


def test_newton_finds_constant_roots(small):
    lam = 2.5
    sys_ = small.with_lambda(lam)
    big, little = _constant_roots(lam)
    for root, cls in ((big, NEGATIVE), (little, NONNEGATIVE)):
        start = StatePair.constant(sys_.grid, 1.05 * root, 0.95 * root)
        sol = newton_solve(sys_, start)
        assert sol.converged and sol.classification == cls
        np.testing.assert_allclose(sol.state.u, root, rtol=1e-9)
        np.testing.assert_allclose(sol.state.v, root, rtol=1e-9)
        assert sol.energy == pytest.approx(_constant_energy(lam, root), rel=1e-9)


def test_deflated_search_finds_sign_patterns(small):
    lam = 2.5
    sys_ = small.with_lambda(lam)
    sols = deflated_search(sys_, SolveConfig(n_starts=6))
    big, _ = _constant_roots(lam)
    assert sum(s.classification == TRIVIAL for s in sols) == 1
    minimizers = [s for s in sols if s.classification == NEGATIVE]
    patterns = {(np.sign(s.state.u[0]), np.sign(s.state.v[0])) for s in minimizers}
    # the +-argmax constant starts guarantee the two same-sign minimizers
    assert {(1, 1), (-1, -1)} <= patterns
    for s in minimizers:
        np.testing.assert_allclose(np.abs(s.state.flat()), big, rtol=1e-8)
    energies = [s.energy for s in sols]
    assert energies == sorted(energies)
    for i, a in enumerate(sols):
        for b in sols[i + 1:]:
            assert state_distance(sys_, a.state, b.state) > 1e-3


def test_preloaded_roots_not_returned(small):
    sys_ = small.with_lambda(2.5)
    cfg = SolveConfig(n_starts=4)
    first = deflated_search(sys_, cfg)
    again = deflated_search(sys_, cfg, known=[s.state for s in first])
    for s in again[1:] if again[0].classification == TRIVIAL else again:
        if s.classification == TRIVIAL:
            continue
        assert all(state_distance(sys_, s.state, k.state) > cfg.distinct_tol for k in first)


def test_start_permutation_invariance(small, rng):
    sys_ = small.with_lambda(2.5)
    th = thresholds_for(sys_)
    cfg = SolveConfig(n_starts=5, rng_seed=7)
    starts = random_starts(sys_, th, cfg)
    perm = [starts[i] for i in rng.permutation(len(starts))]
    assert all(np.array_equal(a, b) for a, b in zip(canonical_order(perm), starts))
    a = deflated_search(sys_, cfg, th, starts=starts, include_default_starts=False)
    b = deflated_search(sys_, cfg, th, starts=canonical_order(perm), include_default_starts=False)
    assert len(a) == len(b)
    for s in a:
        assert min(state_distance(sys_, s.state, t.state) for t in b) <= cfg.distinct_tol


def test_certificate_verdicts(small, rng):
    x = rng.normal(size=2 * small.n_nodes)
    low = nonexistence_certificate(small.with_lambda(0.5), x, S_F=1.0)
    assert low.verdict == "nonexistence-certified" and low.nodewise_ok
    assert low.mid <= low.bound
    high = nonexistence_certificate(small.with_lambda(3.0), x, S_F=1.0)
    assert high.verdict == "no-contradiction"
    with pytest.raises(DomainError):
        nonexistence_certificate(small, np.zeros(2 * small.n_nodes), S_F=1.0)


def test_certificate_identity_at_solution(small):
    lam = 2.5
    sys_ = small.with_lambda(lam)
    big, _ = _constant_roots(lam)
    sol = newton_solve(sys_, StatePair.constant(sys_.grid, big, big))
    cert = nonexistence_certificate(sys_, sol.state, S_F=1.0)
    # at a solution <A x, x> equals the nonlinear pairing
    assert cert.solution_gap < 1e-10
    assert cert.verdict == "no-contradiction"


def test_certificate_catches_understated_SF(small, rng):
    x = rng.normal(size=2 * small.n_nodes)
    assert nonexistence_certificate(small.with_lambda(0.5), x, S_F=1e-3).verdict == "inequality-violated"


def test_sweep_dedupes_and_validates(small):
    cfg = SolveConfig(n_starts=2)
    with pytest.warns(UserWarning, match="repeated"):
        rep = sweep(small, [0.5, 0.25, 0.5], cfg)
    assert [r.lam for r in rep.rows] == [0.25, 0.5]
    assert all(r.n_nontrivial == 0 and r.status == "ok" for r in rep.rows)
    with pytest.raises(UsageError):
        sweep(small, [], cfg)


def test_perturbation_checks(small):
    cfg = SolveConfig(n_starts=2)
    with pytest.raises(DomainError, match="1/s_F"):
        perturbation_stability(small.with_lambda(0.5), small.nl, 1.0, [0.0], cfg)
    with pytest.raises(DomainError, match="growth"):
        perturbation_stability(small.with_lambda(2.5), from_expression("s^6+t^6"), 1.0, [0.0], cfg)
    with pytest.raises(UsageError):
        perturbation_stability(small.with_lambda(2.5), small.nl, 1.0, [float("nan")], cfg)


def test_perturbation_mu_zero_is_base(small):
    cfg = SolveConfig(n_starts=2)
    sys_ = small.with_lambda(2.5)
    rep = perturbation_stability(sys_, sys_.nl, 1.0, [0.0], cfg)
    base = deflated_search(sys_, cfg)
    row = rep.rows[0]
    assert row.count_preserved and row.max_drift == 0.0
    assert [s.energy for s in row.solutions] == [s.energy for s in base]
