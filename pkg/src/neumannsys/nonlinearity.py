"""The coupling potential F(s, t), its derivatives and a sampled hypothesis check.

Catalog entries carry analytic first and second derivatives.  Entries built
from an expression string get complex-step first derivatives and a
central-difference Hessian.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import _kernels
from .errors import DomainError, UsageError
from .expr import Expression

__all__ = [
    "Nonlinearity",
    "HypothesisReport",
    "catalog_log",
    "catalog",
    "from_expression",
    "resolve",
    "evaluate",
    "grad",
    "hessian",
    "check_hypotheses",
    "check_growth_bound",
    "CATALOG",
]


def _hessian_step(s, t):
    return np.maximum(1e-6, 1e-6 * (np.abs(s) + np.abs(t)))


@dataclass(frozen=True)
class Nonlinearity:
    """Vectorized F with gradient and Hessian.

    ``value(s, t) -> F``, ``gradient(s, t) -> (F_s, F_t)``,
    ``hessian(s, t) -> (F_ss, F_st, F_tt)``; all accept broadcastable
    arrays.  A missing ``gradient`` falls back to central differences of
    ``value``; a missing ``hessian`` to central differences of the
    gradient with step ``max(1e-6, 1e-6 * (|s| + |t|))``.
    """

    name: str
    value: Callable
    gradient: Optional[Callable] = None
    hessian: Optional[Callable] = None
    terms: Optional[Callable] = field(default=None, repr=False)

    @property
    def analytic_hessian(self):
        return self.hessian is not None

    def grad(self, s, t):
        if self.gradient is not None:
            return self.gradient(s, t)
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        h = np.cbrt(np.finfo(float).eps) * np.maximum(1.0, np.abs(s) + np.abs(t))
        fs = (self.value(s + h, t) - self.value(s - h, t)) / (2 * h)
        ft = (self.value(s, t + h) - self.value(s, t - h)) / (2 * h)
        return fs, ft

    def hess(self, s, t):
        if self.hessian is not None:
            return self.hessian(s, t)
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        h = _hessian_step(s, t)
        fs_p, ft_p = self.grad(s + h, t)
        fs_m, ft_m = self.grad(s - h, t)
        gs_p, gt_p = self.grad(s, t + h)
        gs_m, gt_m = self.grad(s, t - h)
        fss = (fs_p - fs_m) / (2 * h)
        ftt = (gt_p - gt_m) / (2 * h)
        # one cross entry from both orders keeps the matrix symmetric
        fst = 0.5 * ((gs_p - gs_m) + (ft_p - ft_m)) / (2 * h)
        return fss, fst, ftt

    def all_terms(self, s, t):
        """Return ``(F, F_s, F_t)`` in one pass (no input checks)."""
        if self.terms is not None:
            return self.terms(s, t)
        fs, ft = self.grad(s, t)
        return self.value(s, t), fs, ft

    def scaled(self, k):
        """Return ``k * F`` (exact scaling of every derivative)."""
        k = float(k)
        hessian = None
        if self.hessian is not None:
            def hessian(s, t, _h=self.hessian):
                return tuple(k * x for x in _h(s, t))

        def terms(s, t, _t=self.all_terms):
            return tuple(k * x for x in _t(s, t))

        return Nonlinearity(
            name=f"{k:g}*{self.name}",
            value=lambda s, t, _v=self.value: k * _v(s, t),
            gradient=lambda s, t, _g=self.grad: tuple(k * x for x in _g(s, t)),
            hessian=hessian,
            terms=terms,
        )


def _log_value(s, t):
    return _kernels.log_coupled(s, t)[0]


def _log_grad(s, t):
    _, fs, ft = _kernels.log_coupled(s, t)
    return fs, ft


def catalog_log():
    """F(s, t) = ln(1 + s^2 t^2)."""
    return Nonlinearity(
        name="log-coupled",
        value=_log_value,
        gradient=_log_grad,
        hessian=_kernels.log_coupled_hessian,
        terms=_kernels.log_coupled,
    )


def _quartic_terms(s, t):
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    s3, t3 = s ** 3, t ** 3
    d = 1.0 + s3 * s + t3 * t
    return np.log(d), 4.0 * s3 / d, 4.0 * t3 / d


def _quartic_hessian(s, t):
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    d = 1.0 + s ** 4 + t ** 4
    d2 = d * d
    return ((12.0 * s ** 2 * d - 16.0 * s ** 6) / d2,
            -16.0 * s ** 3 * t ** 3 / d2,
            (12.0 * t ** 2 * d - 16.0 * t ** 6) / d2)


def catalog_log_quartic():
    """F(s, t) = ln(1 + s^4 + t^4)."""
    return Nonlinearity(
        name="log-quartic",
        value=lambda s, t: _quartic_terms(s, t)[0],
        gradient=lambda s, t: _quartic_terms(s, t)[1:],
        hessian=_quartic_hessian,
        terms=_quartic_terms,
    )


def _gauss_terms(s, t):
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    e = np.exp(-(s * s + t * t))
    p = s * s * t * t
    return p * e, 2.0 * s * t * t * (1.0 - s * s) * e, 2.0 * s * s * t * (1.0 - t * t) * e


def _gauss_hessian(s, t):
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    s2, t2 = s * s, t * t
    e = np.exp(-(s2 + t2))
    return (2.0 * t2 * e * (1.0 - 5.0 * s2 + 2.0 * s2 * s2),
            4.0 * s * t * (1.0 - s2) * (1.0 - t2) * e,
            2.0 * s2 * e * (1.0 - 5.0 * t2 + 2.0 * t2 * t2))


def catalog_gauss():
    """F(s, t) = s^2 t^2 exp(-(s^2 + t^2))."""
    return Nonlinearity(
        name="gauss-coupled",
        value=lambda s, t: _gauss_terms(s, t)[0],
        gradient=lambda s, t: _gauss_terms(s, t)[1:],
        hessian=_gauss_hessian,
        terms=_gauss_terms,
    )


CATALOG = {
    "log-coupled": catalog_log,
    "log-quartic": catalog_log_quartic,
    "gauss-coupled": catalog_gauss,
}


def catalog(name):
    try:
        return CATALOG[name]()
    except KeyError:
        raise UsageError(
            f"unknown nonlinearity {name!r}; catalog has {', '.join(sorted(CATALOG))}") from None


_CSTEP = 1e-30


def from_expression(text, name=None):
    """Build F from an expression in ``s`` and ``t``.

    First derivatives use the complex step ``Im F(s + ih, t) / h``, exact
    to rounding for the analytic operations of the expression grammar.
    """
    expr = Expression(text).check_variables({"s", "t"})

    def value(s, t):
        s = np.asarray(s, dtype=float)
        return np.real(expr(s=s, t=t)) + np.zeros_like(s + np.asarray(t, dtype=float))

    def gradient(s, t):
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        zero = np.zeros(np.broadcast(s, t).shape)
        fs = np.imag(expr(s=s + 1j * _CSTEP, t=t + 0j)) / _CSTEP + zero
        ft = np.imag(expr(s=s + 0j, t=t + 1j * _CSTEP)) / _CSTEP + zero
        return fs, ft

    return Nonlinearity(name=name or text, value=value, gradient=gradient)


def resolve(spec):
    """Catalog name or expression string to a Nonlinearity."""
    spec = spec.strip()
    if spec in CATALOG:
        return catalog(spec)
    return from_expression(spec)


def _check_finite(s, t):
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if not (np.all(np.isfinite(s)) and np.all(np.isfinite(t))):
        raise DomainError("non-finite input to the nonlinearity")
    return s, t


def evaluate(nl, s, t):
    s, t = _check_finite(s, t)
    out = nl.value(s, t)
    return float(out) if np.ndim(out) == 0 else out


def grad(nl, s, t):
    s, t = _check_finite(s, t)
    fs, ft = nl.grad(s, t)
    if np.ndim(fs) == 0:
        return float(fs), float(ft)
    return fs, ft


def hessian(nl, s, t):
    s, t = _check_finite(s, t)
    return nl.hess(s, t)


@dataclass
class HypothesisReport:
    """Sampled evidence for (F+), (F0), (F_inf); never a proof."""

    f_plus_ok: bool
    f0_profile: list
    f_inf_profile: list
    M_estimate: float
    passed: bool
    tol: float
    nonzero_found: bool
    failures: list = field(default_factory=list)

    @property
    def verdict(self):
        return "pass" if self.passed else "fail"

    @property
    def degenerate(self):
        return not self.nonzero_found

    def as_dict(self):
        return {
            "verdict": self.verdict,
            "tol": self.tol,
            "f_plus_ok": self.f_plus_ok,
            "nonzero_found": self.nonzero_found,
            "M_estimate": self.M_estimate,
            "f0_profile": [list(p) for p in self.f0_profile],
            "f_inf_profile": [list(p) for p in self.f_inf_profile],
            "failures": list(self.failures),
        }


DEFAULT_RADII = tuple(np.logspace(-4, 4, 33))


def _ring(r, m):
    theta = 2.0 * np.pi * np.arange(m) / m
    return r * np.cos(theta), r * np.sin(theta)


def _growth_ratio(nl, s, t):
    fs, ft = nl.grad(s, t)
    denom = np.abs(s) + np.abs(t)
    ratio = np.maximum(np.abs(fs), np.abs(ft)) / np.where(denom > 0, denom, 1.0)
    return np.where(denom > 0, ratio, 0.0)


def check_hypotheses(nl, radii=DEFAULT_RADII, angles_per_radius=64, tol=1e-2):
    """Sample F and max(|F_s|, |F_t|)/(|s|+|t|) on rings of the given radii.

    The verdict passes iff the ratio is below ``tol`` on the smallest and on
    the largest ring, F >= 0 on every sample, F(0, 0) == 0 and some sample
    is nonzero.  ``M_estimate`` is the largest sampled ratio.
    """
    radii = [float(r) for r in radii]
    if not radii:
        raise UsageError("radii list is empty")
    if any(not np.isfinite(r) or r <= 0 for r in radii):
        raise UsageError("radii must be positive and finite")
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise UsageError("radii must be sorted ascending")
    if angles_per_radius < 8:
        raise UsageError("angles_per_radius must be at least 8")

    failures = []
    f00 = float(nl.value(np.float64(0.0), np.float64(0.0)))
    f_plus_ok = f00 == 0.0
    if not f_plus_ok:
        failures.append(f"(F+) F(0,0) = {f00!r} != 0")
    nonzero = False
    profile = []
    for r in radii:
        s, t = _ring(r, angles_per_radius)
        f = np.asarray(nl.value(s, t), dtype=float)
        if not np.all(np.isfinite(f)):
            f_plus_ok = False
            failures.append(f"(F+) non-finite F on ring r={r:.3g}")
        elif np.any(f < 0):
            f_plus_ok = False
            k = int(np.argmin(f))
            failures.append(f"(F+) F({s[k]:.6g}, {t[k]:.6g}) = {f[k]:.6g} < 0")
        nonzero = nonzero or bool(np.any(f != 0))
        profile.append((r, float(np.max(_growth_ratio(nl, s, t)))))

    if not nonzero:
        failures.append("(F+) no nonzero sample found; F may vanish identically")
    r0, ratio0 = profile[0]
    r1, ratio1 = profile[-1]
    if not ratio0 < tol:
        failures.append(f"(F0) ratio {ratio0:.3g} >= tol {tol:g} at r={r0:.3g}")
    if not ratio1 < tol:
        failures.append(f"(F_inf) ratio {ratio1:.3g} >= tol {tol:g} at r={r1:.3g}")
    half = (len(profile) + 1) // 2
    return HypothesisReport(
        f_plus_ok=f_plus_ok,
        f0_profile=profile[:half],
        f_inf_profile=profile[half:],
        M_estimate=max(p[1] for p in profile),
        passed=not failures,
        tol=tol,
        nonzero_found=nonzero,
        failures=failures,
    )


def check_growth_bound(nl, exponent=3.0, radii=DEFAULT_RADII, angles_per_radius=64):
    """Sampled check of max(|G_s|, |G_t|) <= c (1 + |s|^p + |t|^p).

    Returns ``(ok, c_estimate)``.  Fails when the bound ratio grows over the
    outer third of the radii (the constant would not be uniform) or is
    non-finite.
    """
    if exponent <= 1:
        raise UsageError("growth exponent must exceed 1")
    ratios = []
    for r in radii:
        s, t = _ring(float(r), angles_per_radius)
        fs, ft = nl.grad(s, t)
        bound = 1.0 + np.abs(s) ** exponent + np.abs(t) ** exponent
        ratios.append(float(np.max(np.maximum(np.abs(fs), np.abs(ft)) / bound)))
    ratios = np.asarray(ratios)
    if not np.all(np.isfinite(ratios)):
        return False, float("inf")
    tail = ratios[2 * len(ratios) // 3:]
    ok = bool(np.all(np.diff(tail) <= 1e-12 * max(1.0, tail.max())) or tail[-1] <= ratios[0])
    return ok, float(ratios.max())
