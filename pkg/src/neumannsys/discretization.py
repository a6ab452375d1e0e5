"""Discrete energy of the Neumann system and its first and second variations.

The stiffness operator is the ghost-node Neumann Laplacian with each row
scaled by the node's quadrature weight, plus the weighted zeroth-order term::

    A_a w = W (-Lap_h w + a w)

``W`` is the diagonal of trapezoid weights.  With this scaling ``A_a`` is
symmetric positive definite, ``<A_a u, u>`` is the discrete ``|u|_a^2`` and
the gradient below is the exact differential of the discrete energy::

    I(u, v) = 1/2 (<A_a u, u> + <A_b v, v>) - lam sum_i w_i c_i F(u_i, v_i)
              - mu sum_i w_i d_i G(u_i, v_i)

States are passed around as one flat vector ``x = [u; v]``; ``StatePair``
is the public wrapper.
"""
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .domain import CoefficientField, GridDomain
from .errors import DomainError, NumericError, UsageError
from .nonlinearity import Nonlinearity

__all__ = [
    "StatePair",
    "DiscreteSystem",
    "HessianOperator",
    "stiffness_apply",
    "stiffness_matrix",
    "energy",
    "energy_gradient",
    "energy_hessian_apply",
]


@dataclass(frozen=True, eq=False)
class StatePair:
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        u = np.array(self.u, dtype=float)
        v = np.array(self.v, dtype=float)
        if u.ndim != 1 or u.shape != v.shape:
            raise UsageError(f"u and v must be 1-D of equal length, got {u.shape} and {v.shape}")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise DomainError("state has non-finite entries")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "v", v)

    @classmethod
    def from_flat(cls, x):
        x = np.asarray(x, dtype=float)
        n = x.size // 2
        return cls(x[:n], x[n:])

    @classmethod
    def constant(cls, grid, s, t):
        n = grid.n_nodes
        return cls(np.full(n, float(s)), np.full(n, float(t)))

    @classmethod
    def zeros(cls, grid):
        return cls.constant(grid, 0.0, 0.0)

    def flat(self):
        return np.concatenate([self.u, self.v])


@dataclass(frozen=True, eq=False)
class DiscreteSystem:
    """The discrete (N_lambda) or, with ``mu`` and ``G``, (N_lambda,mu)."""

    grid: GridDomain
    coeffs: CoefficientField
    nl: Nonlinearity
    lam: float
    mu: float = 0.0
    G: Optional[Nonlinearity] = None

    def __post_init__(self):
        lam = float(self.lam)
        if not (np.isfinite(lam) and lam >= 0):
            raise DomainError(f"lambda must be finite and >= 0, got {self.lam!r}")
        object.__setattr__(self, "lam", lam)
        mu = float(self.mu)
        if not np.isfinite(mu):
            raise DomainError(f"mu must be finite, got {self.mu!r}")
        object.__setattr__(self, "mu", mu)
        if self.coeffs.grid is not self.grid:
            raise UsageError("coefficient field lives on a different grid")
        if self.G is not None and self.coeffs.d is None:
            raise UsageError("perturbation G needs a weight field d")

    @property
    def n_nodes(self):
        return self.grid.n_nodes

    @property
    def perturbed(self):
        return self.G is not None and self.mu != 0.0

    def with_lambda(self, lam):
        return DiscreteSystem(self.grid, self.coeffs, self.nl, lam, self.mu, self.G)

    def with_perturbation(self, mu, G, d=None):
        coeffs = self.coeffs if d is None else self.coeffs.with_d(d)
        return DiscreteSystem(self.grid, coeffs, self.nl, self.lam, mu, G)

    def with_nonlinearity(self, nl):
        return DiscreteSystem(self.grid, self.coeffs, nl, self.lam, self.mu, self.G)

    # -- linear part ---------------------------------------------------

    @cached_property
    def _wa(self):
        return np.ascontiguousarray(self.coeffs.a)

    @cached_property
    def _wb(self):
        return np.ascontiguousarray(self.coeffs.b)

    @cached_property
    def _lam_wc(self):
        return self.lam * self.grid.weights * self.coeffs.c

    @cached_property
    def _mu_wd(self):
        return self.mu * self.grid.weights * self.coeffs.d if self.perturbed else None

    def stiffness(self, w, which="a"):
        g = self.grid
        coef = self._wa if which == "a" else self._wb
        return _kernels.stencil_apply(np.ascontiguousarray(w, dtype=float),
                                      g.nx, g.ny, g.hx, g.hy, g.weights, coef)

    def apply_A(self, x):
        """Block-diagonal ``diag(A_a, A_b)`` applied to a flat state."""
        n = self.n_nodes
        return np.concatenate([self.stiffness(x[:n], "a"), self.stiffness(x[n:], "b")])

    @cached_property
    def stiffness_diagonal(self):
        g = self.grid
        lap = 2.0 / g.hx ** 2 + (2.0 / g.hy ** 2 if g.dim == 2 else 0.0)
        return np.concatenate([g.weights * (lap + self.coeffs.a),
                               g.weights * (lap + self.coeffs.b)])

    @cached_property
    def A_factor(self):
        """Sparse LU factors of ``A_a`` and ``A_b`` (for preconditioned descent)."""
        from scipy.sparse.linalg import splu
        return (splu(stiffness_matrix(self, "a").tocsc()),
                splu(stiffness_matrix(self, "b").tocsc()))

    def solve_A(self, r):
        n = self.n_nodes
        fa, fb = self.A_factor
        return np.concatenate([fa.solve(r[:n]), fb.solve(r[n:])])

    # -- nonlinear part ------------------------------------------------

    def _nodal(self, x):
        n = self.n_nodes
        return x[:n], x[n:]

    def energy(self, x):
        u, v = self._nodal(x)
        Au = self.stiffness(u, "a")
        Bv = self.stiffness(v, "b")
        F = self.nl.all_terms(u, v)[0]
        e = 0.5 * (u @ Au + v @ Bv) - self._lam_wc @ F
        if self.perturbed:
            e -= self._mu_wd @ self.G.value(u, v)
        if not np.isfinite(e):
            bad = ~np.isfinite(F)
            where = f" (F non-finite at node {int(np.argmax(bad))})" if bad.any() else ""
            raise NumericError(f"non-finite energy{where}")
        return float(e)

    def gradient(self, x):
        u, v = self._nodal(x)
        _, fs, ft = self.nl.all_terms(u, v)
        gu = self.stiffness(u, "a") - self._lam_wc * fs
        gv = self.stiffness(v, "b") - self._lam_wc * ft
        if self.perturbed:
            gs, gt = self.G.grad(u, v)
            gu -= self._mu_wd * gs
            gv -= self._mu_wd * gt
        g = np.concatenate([gu, gv])
        if not np.all(np.isfinite(g)):
            k = int(np.argmax(~np.isfinite(g))) % self.n_nodes
            raise NumericError(f"non-finite gradient at node {k}")
        return g

    def energy_and_gradient(self, x):
        u, v = self._nodal(x)
        F, fs, ft = self.nl.all_terms(u, v)
        Au = self.stiffness(u, "a")
        Bv = self.stiffness(v, "b")
        e = 0.5 * (u @ Au + v @ Bv) - self._lam_wc @ F
        gu = Au - self._lam_wc * fs
        gv = Bv - self._lam_wc * ft
        if self.perturbed:
            gs, gt = self.G.grad(u, v)
            e -= self._mu_wd @ self.G.value(u, v)
            gu -= self._mu_wd * gs
            gv -= self._mu_wd * gt
        g = np.concatenate([gu, gv])
        if not (np.isfinite(e) and np.all(np.isfinite(g))):
            raise NumericError("non-finite energy or gradient")
        return float(e), g

    def linearize(self, x):
        return HessianOperator(self, x)

    def hessian_apply(self, x, p):
        return self.linearize(x).matvec(p)

    def energy_norm_sq(self, x):
        """``<A_a u, u> + <A_b v, v>``."""
        return float(x @ self.apply_A(x))


class HessianOperator:
    """Second variation at a fixed state, with nodal 2x2 blocks cached."""

    def __init__(self, system, x):
        self.system = system
        n = system.n_nodes
        self.n = n
        u, v = x[:n], x[n:]
        fss, fst, ftt = system.nl.hess(u, v)
        lw = system._lam_wc
        self.haa = -lw * fss
        self.hab = -lw * fst
        self.hbb = -lw * ftt
        if system.perturbed:
            gss, gst, gtt = system.G.hess(u, v)
            mw = system._mu_wd
            self.haa = self.haa - mw * gss
            self.hab = self.hab - mw * gst
            self.hbb = self.hbb - mw * gtt
        if not all(np.all(np.isfinite(h)) for h in (self.haa, self.hab, self.hbb)):
            raise NumericError("non-finite Hessian entries")
        self.haa, self.hab, self.hbb = (np.ascontiguousarray(h, dtype=float)
                                        for h in (self.haa, self.hab, self.hbb))
        self.shape = (2 * n, 2 * n)
        self.dtype = np.dtype(float)

    def _args(self):
        g = self.system.grid
        return (g.nx, g.ny, g.hx, g.hy, g.weights, self.system._wa, self.system._wb,
                self.haa, self.hab, self.hbb)

    def matvec(self, p):
        p = np.ascontiguousarray(p, dtype=float).ravel()
        return _kernels.block_hessian_apply(p, *self._args())

    def diagonal(self):
        return self.system.stiffness_diagonal + np.concatenate([self.haa, self.hbb])

    def solve(self, rhs, rtol, maxiter):
        """MINRES with the Jacobi preconditioner ``|diag H|``.

        Returns ``(x, iterations, converged)``.
        """
        d = np.abs(self.diagonal())
        pinv = 1.0 / np.maximum(d, 1e-12 * max(d.max(), 1e-300))
        rhs = np.ascontiguousarray(rhs, dtype=float)
        return _kernels.block_minres(rhs, *self._args(), pinv, float(rtol), int(maxiter))


def stiffness_matrix(system, which="a"):
    """Assembled sparse ``A_a`` (or ``A_b``), identical to ``stiffness_apply``."""
    g = system.grid
    coef = system.coeffs.a if which == "a" else system.coeffs.b

    def k1(n, h):
        main = np.full(n, 2.0 / h)
        main[0] = main[-1] = 1.0 / h
        off = np.full(n - 1, -1.0 / h)
        return sp.diags([off, main, off], [-1, 0, 1])

    def w1(n, h):
        w = np.full(n, h)
        w[0] = w[-1] = 0.5 * h
        return sp.diags(w)

    if g.dim == 1:
        lap = k1(g.nx, g.hx)
    else:
        lap = (sp.kron(w1(g.ny, g.hy), k1(g.nx, g.hx))
               + sp.kron(k1(g.ny, g.hy), w1(g.nx, g.hx)))
    return (lap + sp.diags(g.weights * coef)).tocsr()


def _flat(system, state):
    if isinstance(state, StatePair):
        x = state.flat()
    else:
        x = np.asarray(state, dtype=float)
    if x.shape != (2 * system.n_nodes,):
        raise UsageError(f"state has {x.size} entries, system needs {2 * system.n_nodes}")
    return x


def stiffness_apply(system, w, which="a"):
    w = np.asarray(w, dtype=float)
    if w.shape != (system.n_nodes,):
        raise UsageError(f"vector has shape {w.shape}, grid has {system.n_nodes} nodes")
    if which not in ("a", "b"):
        raise UsageError("which must be 'a' or 'b'")
    return system.stiffness(w, which)


def energy(system, state):
    return system.energy(_flat(system, state))


def energy_gradient(system, state):
    return StatePair.from_flat(system.gradient(_flat(system, state)))


def energy_hessian_apply(system, state, direction):
    x = _flat(system, state)
    p = _flat(system, direction)
    return StatePair.from_flat(system.hessian_apply(x, p))
