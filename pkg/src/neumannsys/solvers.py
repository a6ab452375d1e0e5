"""Critical points of the discrete energy.

``minimize`` is gradient descent in the discrete H^1 inner product (the
descent direction is ``-A^{-1} grad``), ``newton_solve`` is a line-searched
inexact Newton method, and ``deflated_search`` combines Newton with
deflation to collect several distinct solutions.  ``nonexistence_certificate``
evaluates the inequality chain that rules out nontrivial solutions below
``1/S_F``.
"""
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .discretization import DiscreteSystem, StatePair
from .domain import norms
from .errors import DomainError, NumericError, UsageError
from .nonlinearity import check_growth_bound
from .thresholds import SearchConfig, compute_thresholds

__all__ = [
    "SolveConfig",
    "Solution",
    "CertificateReport",
    "SweepRow",
    "SweepReport",
    "PerturbationReport",
    "minimize",
    "newton_solve",
    "deflated_search",
    "nonexistence_certificate",
    "sweep",
    "perturbation_stability",
    "state_distance",
    "thresholds_for",
]

log = logging.getLogger(__name__)

TRIVIAL = "trivial"
NEGATIVE = "nontrivial-negative-energy"
NONNEGATIVE = "nontrivial-nonnegative-energy"

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class SolveConfig:
    grad_tol_abs: float = 1e-10
    grad_tol_rel: Optional[float] = None  # None -> 1e-12 * sqrt(nodes)
    max_iters: int = 200
    n_starts: int = 20
    rng_seed: int = 0
    distinct_tol: float = 1e-3
    deflation_power: float = 2.0
    deflation_shift: float = 1.0
    inner_rtol: float = 1e-4
    inner_maxiter: int = 1000
    stall_iters: int = 25

    def __post_init__(self):
        for name in ("grad_tol_abs", "distinct_tol", "deflation_power", "inner_rtol"):
            if not getattr(self, name) > 0:
                raise UsageError(f"{name} must be positive")
        if self.grad_tol_rel is not None and not self.grad_tol_rel > 0:
            raise UsageError("grad_tol_rel must be positive")
        if self.deflation_shift < 0:
            raise UsageError("deflation_shift must be nonnegative")
        if self.n_starts < 1 or self.max_iters < 1:
            raise UsageError("n_starts and max_iters must be >= 1")

    def tolerance(self, n_nodes):
        """Stopping threshold on the Euclidean residual norm."""
        rel = self.grad_tol_rel if self.grad_tol_rel is not None else 1e-12 * math.sqrt(n_nodes)
        return max(self.grad_tol_abs, rel)


@dataclass
class Solution:
    state: StatePair
    energy: float
    residual_norm: float
    classification: str
    iterations: int
    start_id: int = -1
    converged: bool = True
    tolerance: float = 0.0
    method: str = ""
    message: str = ""

    @property
    def nontrivial(self):
        return self.classification != TRIVIAL

    def summary(self):
        return {
            "classification": self.classification,
            "energy": self.energy,
            "residual_norm": self.residual_norm,
            "iterations": self.iterations,
            "start_id": self.start_id,
            "converged": self.converged,
        }


def classify(system, x, energy):
    if np.linalg.norm(x) < 1e-8 * math.sqrt(system.n_nodes):
        return TRIVIAL
    return NEGATIVE if energy < 0 else NONNEGATIVE


def _as_flat(system, start):
    x = start.flat() if isinstance(start, StatePair) else np.array(start, dtype=float)
    if x.shape != (2 * system.n_nodes,):
        raise UsageError(f"start has {x.size} entries, system needs {2 * system.n_nodes}")
    if not np.all(np.isfinite(x)):
        raise DomainError("start has non-finite entries")
    return x


def _solution(system, x, it, converged, tol, method, start_id=-1, message=""):
    e, g = system.energy_and_gradient(x)
    return Solution(
        state=StatePair.from_flat(x),
        energy=e,
        residual_norm=float(np.linalg.norm(g)),
        classification=classify(system, x, e),
        iterations=it,
        start_id=start_id,
        converged=converged,
        tolerance=tol,
        method=method,
        message=message,
    )


def _armijo_energy(system, x, e, g, p, trace):
    """Backtracking on the energy from step 1, halving, constant 1e-4."""
    slope = float(g @ p)
    alpha = 1.0
    for _ in range(60):
        xn = x + alpha * p
        try:
            en = system.energy(xn)
        except NumericError as exc:
            raise NumericError(f"non-finite energy in line search: {exc}", trace) from None
        # rounding slack: near a critical point the decrease is below eps*|e|
        if en <= e + 1e-4 * alpha * slope + 8 * _EPS * (abs(e) + abs(en)):
            return xn, alpha
        alpha *= 0.5
    return None, 0.0


def minimize(system, start, cfg=SolveConfig()):
    """Descent along ``-A^{-1} grad`` with Armijo backtracking."""
    x = _as_flat(system, start)
    e, g = system.energy_and_gradient(x)
    gnorm = float(np.linalg.norm(g))
    tol = cfg.tolerance(system.n_nodes)
    trace = []
    for it in range(cfg.max_iters + 1):
        trace.append((it, e, gnorm))
        if gnorm < tol:
            return _solution(system, x, it, True, tol, "minimize")
        if it == cfg.max_iters:
            break
        p = -system.solve_A(g)
        xn, alpha = _armijo_energy(system, x, e, g, p, trace[-20:])
        if xn is None:
            return _solution(system, x, it, False, tol, "minimize", message="line search failed")
        x = xn
        e, g = system.energy_and_gradient(x)
        gnorm = float(np.linalg.norm(g))
    return _solution(system, x, cfg.max_iters, False, tol, "minimize",
                     message="max_iters exceeded")


class _Deflation:
    """eta(x) = prod_k (shift + dist(x, x_k)^-p) and grad log eta."""

    def __init__(self, system, known, power, shift):
        self.system = system
        self.known = [np.asarray(k, dtype=float) for k in known]
        self.power = power
        self.shift = shift
        self.n = system.n_nodes

    def __call__(self, x):
        if not self.known:
            return 1.0, None
        eta = 1.0
        q = np.zeros_like(x)
        for xk in self.known:
            diff = x - xk
            Ad = self.system.apply_A(diff)
            d2 = max(float(diff @ Ad) / self.n, 1e-300)
            d = math.sqrt(d2)
            dp = d ** -self.power
            factor = self.shift + dp
            eta *= factor
            q -= (self.power * dp / (d2 * self.n * factor)) * Ad
        return eta, q


def _newton(system, x, cfg, known=(), start_id=-1):
    """Inexact Newton on ``eta(x) * grad(x) = 0`` (``eta = 1`` without ``known``)."""
    deflation = _Deflation(system, known, cfg.deflation_power, cfg.deflation_shift)
    method = "deflated-newton" if known else "newton"
    e, g = system.energy_and_gradient(x)
    eta, q = deflation(x)
    res = eta * float(np.linalg.norm(g))
    tol = cfg.tolerance(system.n_nodes)
    best, since_best = res, 0
    trace = []
    gnorm = res / eta
    for it in range(cfg.max_iters + 1):
        trace.append((it, e, res))
        # eta can be huge near a new root, so eta*|g| may stall at rounding
        # level; a root of g that is not a known root is a root either way
        if res < tol or gnorm < tol:
            return _solution(system, x, it, True, tol, method, start_id), eta
        if it == cfg.max_iters:
            break
        if since_best >= cfg.stall_iters:
            return _solution(system, x, it, False, tol, method, start_id, "stalled"), eta

        step = None
        H = system.linearize(x)
        forcing = min(cfg.inner_rtol, max(0.1 * tol / max(res, 1e-300), 1e-14))
        d, _, _ = H.solve(-g, forcing, cfg.inner_maxiter)
        if np.all(np.isfinite(d)):
            Hd = H.matvec(d)
            if np.linalg.norm(Hd + g) <= 0.5 * gnorm:
                denom = 1.0 if q is None else 1.0 - float(q @ d)
                if abs(denom) > 1e-10:
                    p = d / denom
                    Hp = Hd / denom
                    qp = 0.0 if q is None else float(q @ p)
                    # d/dalpha |eta g|^2 at alpha = 0
                    dphi = 2.0 * eta * eta * float(g @ (Hp + g * qp))
                    if dphi < 0:
                        phi = res * res
                        alpha = 1.0
                        for _ in range(20):
                            xn = x + alpha * p
                            try:
                                en, gn = system.energy_and_gradient(xn)
                            except NumericError:
                                alpha *= 0.5
                                continue
                            etan, qn = deflation(xn)
                            resn = etan * float(np.linalg.norm(gn))
                            if resn * resn <= phi + 1e-4 * alpha * dphi:
                                step = (xn, en, gn, etan, qn, resn)
                                break
                            alpha *= 0.5
        if step is None:
            # fallback: energy descent in the H^1 inner product
            p = -system.solve_A(g)
            xn, _ = _armijo_energy(system, x, e, g, p, trace[-20:])
            if xn is None:
                return _solution(system, x, it, False, tol, method, start_id,
                                 "no descent step"), eta
            en, gn = system.energy_and_gradient(xn)
            etan, qn = deflation(xn)
            step = (xn, en, gn, etan, qn, etan * float(np.linalg.norm(gn)))
        x, e, g, eta, q, res = step
        gnorm = float(np.linalg.norm(g))
        if res < best * (1 - 1e-3):
            best, since_best = res, 0
        else:
            since_best += 1
    return _solution(system, x, cfg.max_iters, False, tol, method, start_id,
                     "max_iters exceeded"), eta


def newton_solve(system, start, cfg=SolveConfig()):
    """Newton iteration on the energy gradient.

    The inner solve is preconditioned MINRES (Jacobi, ``|diag H|``) to a
    relative tolerance of at most ``cfg.inner_rtol``; steps are
    line-searched on ``|grad|^2``.  When the inner solve stagnates or the
    step is not a descent direction for ``|grad|^2`` an energy-descent step
    is taken instead.
    """
    x = _as_flat(system, start)
    sol, _ = _newton(system, x, cfg)
    return sol


def state_distance(system, x, y):
    """``sqrt(|u-u'|_a^2 + |v-v'|_b^2) / sqrt(nodes)``."""
    x = x.flat() if isinstance(x, StatePair) else np.asarray(x, dtype=float)
    y = y.flat() if isinstance(y, StatePair) else np.asarray(y, dtype=float)
    diff = x - y
    return math.sqrt(max(system.energy_norm_sq(diff), 0.0) / system.n_nodes)


_THRESHOLD_CACHE = {}


def thresholds_for(system, search_cfg=SearchConfig()):
    """Thresholds of the unperturbed system (cached per nonlinearity/coefficients)."""
    key = (id(system.nl), id(system.coeffs), search_cfg)
    hit = _THRESHOLD_CACHE.get(key)
    if hit is not None and hit[0] is system.nl and hit[1] is system.coeffs:
        return hit[2]
    rep = compute_thresholds(system.nl, norms(system.coeffs), search_cfg, check=False)
    _THRESHOLD_CACHE[key] = (system.nl, system.coeffs, rep)
    return rep


def default_starts(system, thresholds, cfg):
    """Constant starts from the s_F maximizer, then canonically ordered random ones."""
    n = system.n_nodes
    s0, t0 = thresholds.argmax_sF
    starts = []
    for scale in (1.0, 0.5, 2.0):
        for sign in (1.0, -1.0):
            starts.append(np.concatenate([np.full(n, sign * scale * s0),
                                          np.full(n, sign * scale * t0)]))
    starts.extend(random_starts(system, thresholds, cfg))
    return starts


def random_starts(system, thresholds, cfg):
    n = system.n_nodes
    amp = math.hypot(*thresholds.argmax_sF) / math.sqrt(2.0)
    rng = np.random.default_rng(cfg.rng_seed)
    out = []
    for _ in range(cfg.n_starts):
        base = amp * rng.standard_normal(2)
        out.append(np.repeat(base, n) + 0.5 * amp * rng.standard_normal(2 * n))
    return canonical_order(out)


def canonical_order(states):
    """Sort states by (norm, bytes) so results do not depend on input order."""
    return sorted(states, key=lambda x: (round(float(np.linalg.norm(x)), 9), x.tobytes()))


def deflated_search(system, cfg=SolveConfig(), thresholds=None, starts=None,
                    include_default_starts=True, known=()):
    """Collect distinct critical points, trivial one included, sorted by energy.

    ``starts`` are tried before the default starts (constant states at
    +-{0.5, 1, 2} x the s_F maximizer, then ``cfg.n_starts`` random states).
    ``known`` solutions are preloaded into the found set and not returned
    again.
    """
    if thresholds is None and include_default_starts:
        thresholds = thresholds_for(system)
    n = system.n_nodes
    zero = np.zeros(2 * n)
    found = [_solution(system, zero, 0, True, cfg.tolerance(n), "trivial")]
    preloaded = [np.asarray(k.flat() if isinstance(k, StatePair) else k, dtype=float)
                 for k in known]
    candidates = [np.array(_as_flat(system, s)) for s in (starts or [])]
    if include_default_starts:
        candidates.extend(default_starts(system, thresholds, cfg))

    for sid, x0 in enumerate(candidates):
        roots = [f.state.flat() for f in found] + preloaded
        sol, _ = _newton(system, x0, cfg, known=roots, start_id=sid)
        if not sol.converged:
            log.debug("start %d: %s after %d iterations", sid, sol.message, sol.iterations)
            continue
        polished, _ = _newton(system, sol.state.flat(), cfg, start_id=sid)
        if not polished.converged:
            continue
        x = polished.state.flat()
        if any(state_distance(system, x, r) <= cfg.distinct_tol for r in roots):
            continue
        polished.method = "deflated-newton"
        found.append(polished)

    found.sort(key=lambda s: (s.energy, float(np.linalg.norm(s.state.flat()))))
    return found


@dataclass
class CertificateReport:
    lhs: float
    mid: float
    bound: float
    ratio: float
    lambda_S_F: float
    nodewise_ok: bool
    max_nodewise_excess: float
    solution_gap: float
    verdict: str

    def as_dict(self):
        return dict(self.__dict__)


def nonexistence_certificate(system, state, S_F=None, thresholds=None):
    """Evaluate ``|u|_a^2 + |v|_b^2 = lam int c (F_s u + F_t v) <= lam S_F (|u|_a^2 + |v|_b^2)``.

    ``lhs`` is the squared energy norm, ``mid`` the nonlinear pairing and
    ``bound = lam S_F lhs``.  The nodewise inequalities
    ``|s F_s + t F_t| <= S_F (alpha s^2 + beta t^2)`` and
    ``c (alpha u^2 + beta v^2) <= a u^2 + b v^2`` (alpha = 1/|c/a|_inf,
    beta = 1/|c/b|_inf) are checked at every node; with positive weights
    they give ``mid <= bound``.  Verdict ``nonexistence-certified`` when
    ``lam S_F < 1``: then a solution would satisfy lhs = mid < lhs.
    The perturbation term is not part of the chain.
    """
    x = _as_flat(system, state)
    if not np.any(x):
        raise DomainError("certificate is vacuous for the zero state")
    if S_F is None:
        S_F = (thresholds or thresholds_for(system)).S_F
    n = system.n_nodes
    u, v = x[:n], x[n:]
    coeffs = system.coeffs
    nb = norms(coeffs)
    alpha, beta = 1.0 / nb.c_over_a_inf, 1.0 / nb.c_over_b_inf
    _, fs, ft = system.nl.all_terms(u, v)
    pairing = u * fs + v * ft
    lhs = system.energy_norm_sq(x)
    mid = float(system._lam_wc @ pairing)
    bound = system.lam * S_F * lhs

    quad = alpha * u * u + beta * v * v
    excess1 = np.abs(pairing) - S_F * quad
    excess2 = coeffs.c * quad - (coeffs.a * u * u + coeffs.b * v * v)
    scale1 = 1e-12 * np.maximum(S_F * quad, np.abs(pairing)) + 1e-300
    scale2 = 1e-12 * (coeffs.a * u * u + coeffs.b * v * v) + 1e-300
    nodewise_ok = bool(np.all(excess1 <= scale1) and np.all(excess2 <= scale2))
    max_excess = float(max(np.max(excess1 / np.maximum(S_F * quad, 1e-300)),
                           np.max(excess2 / np.maximum(coeffs.a * u * u + coeffs.b * v * v, 1e-300))))
    chain_ok = mid <= bound + 1e-12 * lhs
    lam_S = system.lam * S_F
    if not (nodewise_ok and chain_ok):
        verdict = "inequality-violated"
    elif lam_S < 1:
        verdict = "nonexistence-certified"
    else:
        verdict = "no-contradiction"
    return CertificateReport(
        lhs=lhs,
        mid=mid,
        bound=bound,
        ratio=mid / lhs,
        lambda_S_F=lam_S,
        nodewise_ok=nodewise_ok,
        max_nodewise_excess=max_excess,
        solution_gap=abs(lhs - mid) / lhs,
        verdict=verdict,
    )


@dataclass
class SweepRow:
    lam: float
    s_F: float
    S_F: float
    n_nontrivial: int
    min_energy: float
    max_residual: float
    status: str
    solutions: list = field(default_factory=list)


@dataclass
class SweepReport:
    s_F: float
    S_F: float
    rows: list

    @property
    def lambda_lower(self):
        return 1.0 / self.S_F

    @property
    def lambda_upper(self):
        return 1.0 / self.s_F


def _dedupe_lambdas(lambdas):
    lambdas = [float(l) for l in lambdas]
    if not lambdas:
        raise UsageError("empty lambda list")
    for lam in lambdas:
        if not (np.isfinite(lam) and lam >= 0):
            raise UsageError(f"lambda must be finite and >= 0, got {lam!r}")
    unique = sorted(set(lambdas))
    if len(unique) < len(lambdas):
        warnings.warn(f"dropped {len(lambdas) - len(unique)} repeated lambda value(s)",
                      UserWarning, stacklevel=3)
    return unique


def sweep(base_system, lambdas, cfg=SolveConfig(), thresholds=None):
    """Run ``deflated_search`` at each lambda (sorted, deduplicated)."""
    lambdas = _dedupe_lambdas(lambdas)
    if thresholds is None:
        thresholds = thresholds_for(base_system)
    rows = []
    for lam in lambdas:
        system = base_system.with_lambda(lam)
        try:
            sols = deflated_search(system, cfg, thresholds)
        except (NumericError, ArithmeticError, ValueError) as exc:
            rows.append(SweepRow(lam, thresholds.s_F, thresholds.S_F, 0,
                                 float("nan"), float("nan"), f"error: {exc}"))
            continue
        rows.append(SweepRow(
            lam=lam,
            s_F=thresholds.s_F,
            S_F=thresholds.S_F,
            n_nontrivial=sum(s.nontrivial for s in sols),
            min_energy=min(s.energy for s in sols),
            max_residual=max(s.residual_norm for s in sols),
            status="ok",
            solutions=sols,
        ))
    return SweepReport(thresholds.s_F, thresholds.S_F, rows)


@dataclass
class PerturbationRow:
    mu: float
    n_nontrivial: int
    count_preserved: bool
    max_drift: float
    drifts: list
    status: str
    solutions: list = field(default_factory=list)


@dataclass
class PerturbationReport:
    lam: float
    base_count: int
    base_solutions: list
    rows: list
    growth_constant: float


def perturbation_stability(system, G, d, mus, cfg=SolveConfig(), thresholds=None,
                           growth_exponent=3.0):
    """Follow the solutions of the unperturbed system into (N_lambda,mu).

    For each mu the perturbed deflated search starts from the mu = 0
    solutions only; ``max_drift`` is the largest distance from a mu = 0
    branch to the nearest perturbed solution.
    """
    ok, c_est = check_growth_bound(G, growth_exponent)
    if not ok:
        raise DomainError(f"G={G.name} fails the sampled growth bound with exponent {growth_exponent:g}")
    mus = [float(m) for m in mus]
    if not mus:
        raise UsageError("empty mu list")
    if not all(np.isfinite(m) for m in mus):
        raise UsageError("mu values must be finite")
    if thresholds is None:
        thresholds = thresholds_for(system)
    if not system.lam > 1.0 / thresholds.s_F:
        raise DomainError(
            f"perturbation stability needs lambda > 1/s_F = {1.0 / thresholds.s_F:.6g}, "
            f"got {system.lam:.6g}")
    base_sys = DiscreteSystem(system.grid, system.coeffs, system.nl, system.lam)
    base = deflated_search(base_sys, cfg, thresholds)
    branches = [s for s in base if s.nontrivial]
    rows = []
    for mu in mus:
        if mu == 0.0:
            rows.append(PerturbationRow(mu, len(branches), True, 0.0,
                                        [0.0] * len(branches), "ok", base))
            continue
        psys = base_sys.with_perturbation(mu, G, d)
        try:
            sols = deflated_search(psys, cfg, thresholds,
                                   starts=[b.state for b in branches],
                                   include_default_starts=False)
        except (NumericError, ArithmeticError, ValueError) as exc:
            rows.append(PerturbationRow(mu, 0, False, float("nan"), [], f"error: {exc}"))
            continue
        new = [s for s in sols if s.nontrivial]
        drifts = [min((state_distance(base_sys, b.state, s.state) for s in new),
                      default=float("inf")) for b in branches]
        rows.append(PerturbationRow(
            mu=mu,
            n_nontrivial=len(new),
            count_preserved=len(new) == len(branches),
            max_drift=max(drifts, default=0.0),
            drifts=drifts,
            status="ok",
            solutions=sols,
        ))
    return PerturbationReport(system.lam, len(branches), base, rows, c_est)
