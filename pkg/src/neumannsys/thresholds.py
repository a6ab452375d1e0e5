"""The threshold constants s_F and S_F.

Both are maxima over the punctured plane of explicit ratios::

    s_F = 2 |c|_1 max F(s,t) / (|a|_1 s^2 + |b|_1 t^2)
    S_F = max |s F_s + t F_t| / (s^2 / |c/a|_inf + t^2 / |c/b|_inf)

The search evaluates the ratio on a log-polar grid and refines the best grid
local maxima with Nelder-Mead.  Every evaluated point is a witness, so the
reported values are lower bounds of the true maxima.
"""
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, SearchError
from .nonlinearity import check_hypotheses

__all__ = [
    "SearchConfig",
    "Maximum",
    "ThresholdReport",
    "ratio_sF",
    "ratio_SF",
    "compute_sF",
    "compute_SF",
    "stationarity_residual",
    "compute_thresholds",
    "nelder_mead",
]


@dataclass(frozen=True)
class SearchConfig:
    r_min: float = 1e-4
    r_max: float = 1e4
    n_radii: int = 200
    n_angles: int = 512
    n_starts: int = 5
    rel_tol: float = 1e-8
    max_iter: int = 5000

    def __post_init__(self):
        if not 0 < self.r_min < self.r_max:
            raise ValueError("need 0 < r_min < r_max")
        if self.n_radii < 2 or self.n_angles < 8 or self.n_starts < 1:
            raise ValueError("need n_radii >= 2, n_angles >= 8, n_starts >= 1")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")


def _ratio_sF(nl, nb, s, t):
    denom = nb.a_l1 * s * s + nb.b_l1 * t * t
    f = nl.value(s, t)
    with np.errstate(invalid="ignore", divide="ignore"):
        r = 2.0 * nb.c_l1 * f / denom
    return np.where(denom > 0, r, 0.0)


def _ratio_SF(nl, nb, s, t):
    fs, ft = nl.grad(s, t)
    denom = s * s / nb.c_over_a_inf + t * t / nb.c_over_b_inf
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.abs(s * fs + t * ft) / denom
    return np.where(denom > 0, r, 0.0)


def _scalar_ratio(fn, nl, nb, s, t):
    s, t = float(s), float(t)
    if not (np.isfinite(s) and np.isfinite(t)):
        raise DomainError("non-finite point")
    if s == 0.0 and t == 0.0:
        raise DomainError("the ratio is undefined at (0, 0); its limit there is 0")
    return float(fn(nl, nb, np.float64(s), np.float64(t)))


def ratio_sF(nl, nb, s, t):
    return _scalar_ratio(_ratio_sF, nl, nb, s, t)


def ratio_SF(nl, nb, s, t):
    return _scalar_ratio(_ratio_SF, nl, nb, s, t)


def nelder_mead(f, x0, step, rel_tol=1e-8, max_iter=5000):
    """Minimize ``f`` from ``x0``; stop when the simplex diameter drops below
    ``rel_tol * max(1, |best|)``.

    Standard coefficients (reflection 1, expansion 2, contraction 1/2,
    shrink 1/2).  Returns ``(x_best, f_best, iterations, diameter)``.
    """
    x0 = np.asarray(x0, dtype=float)
    n = x0.size
    simplex = np.vstack([x0] + [x0 + step * e for e in np.eye(n)])
    fvals = np.array([f(x) for x in simplex])
    it = 0
    diameter = np.inf
    while it < max_iter:
        order = np.argsort(fvals, kind="stable")
        simplex, fvals = simplex[order], fvals[order]
        diameter = max(np.linalg.norm(p - simplex[0]) for p in simplex[1:])
        if diameter <= rel_tol * max(1.0, np.linalg.norm(simplex[0])):
            break
        it += 1
        centroid = simplex[:-1].mean(axis=0)
        xr = centroid + (centroid - simplex[-1])
        fr = f(xr)
        if fr < fvals[0]:
            xe = centroid + 2.0 * (centroid - simplex[-1])
            fe = f(xe)
            if fe < fr:
                simplex[-1], fvals[-1] = xe, fe
            else:
                simplex[-1], fvals[-1] = xr, fr
            continue
        if fr < fvals[-2]:
            simplex[-1], fvals[-1] = xr, fr
            continue
        if fr < fvals[-1]:
            xc = centroid + 0.5 * (xr - centroid)
            fc = f(xc)
            if fc <= fr:
                simplex[-1], fvals[-1] = xc, fc
                continue
        else:
            xc = centroid + 0.5 * (simplex[-1] - centroid)
            fc = f(xc)
            if fc < fvals[-1]:
                simplex[-1], fvals[-1] = xc, fc
                continue
        simplex[1:] = simplex[0] + 0.5 * (simplex[1:] - simplex[0])
        fvals[1:] = [f(x) for x in simplex[1:]]
    k = int(np.argmin(fvals))
    return simplex[k], float(fvals[k]), it, float(diameter)


@dataclass
class Maximum:
    """Result of one ratio maximization."""

    value: float
    argmax: tuple
    maximizers: list
    grid_value: float
    trace: dict = field(default_factory=dict)

    def __iter__(self):
        # unpacks as (value, argmax)
        return iter((self.value, self.argmax))


def _polar_key(x):
    # rounded so refinement noise does not decide ties
    r = float(np.hypot(x[0], x[1]))
    theta = float(np.arctan2(x[1], x[0])) % (2.0 * np.pi)
    return float(f"{r:.6g}"), round(theta, 6)


def _seed_indices(vals, k):
    # local maxima of the (radius x periodic angle) grid, best first;
    # ties by smaller radius index then smaller angle index
    padded = np.pad(vals, ((1, 1), (0, 0)), constant_values=-np.inf)
    is_max = np.ones(vals.shape, dtype=bool)
    for dr in (-1, 0, 1):
        for da in (-1, 0, 1):
            if dr == 0 and da == 0:
                continue
            nb = np.roll(padded, da, axis=1)[1 + dr:1 + dr + vals.shape[0]]
            is_max &= vals >= nb
    flat = vals.ravel()
    idx = np.arange(flat.size)
    order = np.lexsort((idx, -flat))
    local = [i for i in order if is_max.flat[i] and flat[i] > 0]
    rest = [i for i in order if not is_max.flat[i] and flat[i] > 0]
    return [np.unravel_index(i, vals.shape) for i in (local + rest)[:k]]


def _maximize(ratio, nl, nb, cfg, label):
    radii = np.logspace(np.log10(cfg.r_min), np.log10(cfg.r_max), cfg.n_radii)
    angles = 2.0 * np.pi * np.arange(cfg.n_angles) / cfg.n_angles
    s = radii[:, None] * np.cos(angles)[None, :]
    t = radii[:, None] * np.sin(angles)[None, :]
    vals = np.asarray(ratio(nl, nb, s, t), dtype=float)
    vals = np.where(np.isfinite(vals), vals, -np.inf)
    grid_best = float(vals.max())
    if not grid_best > 0:
        raise SearchError(
            f"{label}: F vanished on entire search grid "
            f"(r in [{cfg.r_min:g}, {cfg.r_max:g}]); F may be identically zero")

    def objective(x):
        if x[0] == 0.0 and x[1] == 0.0:
            return 0.0
        v = float(ratio(nl, nb, np.float64(x[0]), np.float64(x[1])))
        return -v if np.isfinite(v) else np.inf

    growth = radii[1] / radii[0] - 1.0
    candidates = []
    iterations = []
    diameters = []
    for i, j in _seed_indices(vals, cfg.n_starts):
        x0 = np.array([s[i, j], t[i, j]])
        step = max(growth, 2.0 * np.pi / cfg.n_angles) * radii[i]
        x, fx, it, diam = nelder_mead(objective, x0, step, cfg.rel_tol, cfg.max_iter)
        if -fx < vals[i, j]:
            # refinement never loses ground
            x, fx = x0, -vals[i, j]
        candidates.append((-fx, x))
        iterations.append(it)
        diameters.append(diam)

    best_value = max(v for v, _ in candidates)
    close = [(v, x) for v, x in candidates
             if v >= best_value - 1e-8 * max(1.0, abs(best_value))]
    close.sort(key=lambda vx: (-vx[0],) + _polar_key(vx[1]))
    maximizers = []
    for v, x in close:
        if all(np.linalg.norm(x - y) > 1e-6 * max(1.0, np.linalg.norm(x)) for _, y in maximizers):
            maximizers.append((v, x))
    # deterministic pick among near-ties: smaller radius, then smaller angle
    arg = min(maximizers, key=lambda vx: _polar_key(vx[1]))[1]
    value = max(v for v, _ in maximizers)
    return Maximum(
        value=float(value),
        argmax=(float(arg[0]), float(arg[1])),
        maximizers=[(float(x[0]), float(x[1])) for _, x in maximizers],
        grid_value=grid_best,
        trace={
            "n_radii": cfg.n_radii,
            "n_angles": cfg.n_angles,
            "iterations": iterations,
            "final_simplex": diameters,
        },
    )


def _require_hypotheses(nl, override):
    report = check_hypotheses(nl)
    if report.passed:
        return False
    msg = f"hypotheses not satisfied for {nl.name}: {'; '.join(report.failures)}"
    if not override:
        raise SearchError(msg)
    warnings.warn(msg + " (continuing on override)", RuntimeWarning, stacklevel=3)
    return True


def compute_sF(nl, nb, cfg=SearchConfig(), check=True, override=False):
    """Maximize the s_F ratio.  ``Maximum`` unpacks as ``(value, argmax)``."""
    if check:
        _require_hypotheses(nl, override)
    return _maximize(_ratio_sF, nl, nb, cfg, "s_F")


def compute_SF(nl, nb, cfg=SearchConfig(), check=True, override=False):
    if check:
        _require_hypotheses(nl, override)
    return _maximize(_ratio_SF, nl, nb, cfg, "S_F")


def stationarity_residual(nl, nb, s0, t0):
    """``|s0 F_s + t0 F_t - 2 F|``; zero at any maximizer of the s_F ratio."""
    s0, t0 = float(s0), float(t0)
    if not (np.isfinite(s0) and np.isfinite(t0)):
        raise DomainError("non-finite point")
    if s0 == 0.0 and t0 == 0.0:
        raise DomainError("stationarity residual needs (s0, t0) != (0, 0)")
    fs, ft = nl.grad(np.float64(s0), np.float64(t0))
    f = nl.value(np.float64(s0), np.float64(t0))
    return float(abs(s0 * fs + t0 * ft - 2.0 * f))


@dataclass
class ThresholdReport:
    s_F: float
    S_F: float
    argmax_sF: tuple
    argmax_SF: tuple
    stationarity_residual: float
    maximizers_sF: list
    maximizers_SF: list
    trace: dict
    hypotheses_overridden: bool = False

    @property
    def lambda_lower(self):
        """1 / S_F: below it only the trivial solution exists."""
        return 1.0 / self.S_F

    @property
    def lambda_upper(self):
        """1 / s_F: above it at least two nontrivial solutions exist."""
        return 1.0 / self.s_F

    def as_dict(self):
        return {
            "s_F": self.s_F,
            "S_F": self.S_F,
            "argmax_sF": list(self.argmax_sF),
            "argmax_SF": list(self.argmax_SF),
            "maximizers_sF": [list(p) for p in self.maximizers_sF],
            "maximizers_SF": [list(p) for p in self.maximizers_SF],
            "stationarity_residual": self.stationarity_residual,
            "inv_S_F": self.lambda_lower,
            "inv_s_F": self.lambda_upper,
            "hypotheses_overridden": self.hypotheses_overridden,
            "trace": self.trace,
        }


def compute_thresholds(nl, nb, cfg=SearchConfig(), check=True, override=False):
    overridden = _require_hypotheses(nl, override) if check else False
    low = _maximize(_ratio_sF, nl, nb, cfg, "s_F")
    high = _maximize(_ratio_SF, nl, nb, cfg, "S_F")
    return ThresholdReport(
        s_F=low.value,
        S_F=high.value,
        argmax_sF=low.argmax,
        argmax_SF=high.argmax,
        stationarity_residual=stationarity_residual(nl, nb, *low.argmax),
        maximizers_sF=low.maximizers,
        maximizers_SF=high.maximizers,
        trace={"s_F": low.trace, "S_F": high.trace},
        hypotheses_overridden=overridden,
    )
