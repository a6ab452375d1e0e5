"""Uniform grids on intervals and rectangles, coefficient fields and norms."""
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np

from .errors import DomainError, UsageError
from .expr import Expression

__all__ = [
    "GridDomain",
    "CoefficientField",
    "NormBundle",
    "build_uniform_grid",
    "integral",
    "norms",
    "sample_field",
    "build_coefficients",
]


@dataclass(frozen=True, eq=False)
class GridDomain:
    """Nodes of (0, Lx) or (0, Lx) x (0, Ly), x index fastest.

    ``weights`` are the trapezoid weights: ``h`` inside, ``h/2`` on the
    boundary, tensorized in 2-D.
    """

    dim: int
    lengths: tuple
    counts: tuple
    spacing: tuple
    weights: np.ndarray

    @cached_property
    def n_nodes(self):
        return int(np.prod(self.counts))

    @property
    def nx(self):
        return self.counts[0]

    @property
    def ny(self):
        return self.counts[1] if self.dim == 2 else 1

    @property
    def hx(self):
        return self.spacing[0]

    @property
    def hy(self):
        return self.spacing[1] if self.dim == 2 else 1.0

    @property
    def measure(self):
        return float(np.prod(self.lengths))

    def axes(self):
        return [np.linspace(0.0, L, n) for L, n in zip(self.lengths, self.counts)]

    def coordinates(self):
        """Per-node coordinate arrays ``(x,)`` or ``(x, y)``."""
        axes = self.axes()
        if self.dim == 1:
            return (axes[0],)
        y, x = np.meshgrid(axes[1], axes[0], indexing="ij")
        return x.ravel(), y.ravel()


def _trapezoid(n, h):
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    return w


def build_uniform_grid(dim, lengths, counts):
    if dim not in (1, 2):
        raise UsageError(f"dim must be 1 or 2, got {dim!r}")
    lengths = tuple(float(L) for L in np.atleast_1d(lengths))
    counts = tuple(int(n) for n in np.atleast_1d(counts))
    if len(lengths) != dim or len(counts) != dim:
        raise UsageError(f"need {dim} length(s) and {dim} count(s)")
    if any(not np.isfinite(L) or L <= 0 for L in lengths):
        raise UsageError(f"lengths must be positive, got {lengths}")
    if any(n < 3 for n in counts):
        raise UsageError(f"need at least 3 nodes per axis, got {counts}")
    spacing = tuple(L / (n - 1) for L, n in zip(lengths, counts))
    weights = _trapezoid(counts[0], spacing[0])
    if dim == 2:
        weights = np.outer(_trapezoid(counts[1], spacing[1]), weights).ravel()
    weights.setflags(write=False)
    return GridDomain(dim, lengths, counts, spacing, weights)


def _check_length(grid, f, what="vector"):
    f = np.asarray(f, dtype=float)
    if f.shape != (grid.n_nodes,):
        raise UsageError(f"{what} has shape {f.shape}, grid has {grid.n_nodes} nodes")
    return f


def integral(grid, f):
    """Trapezoid quadrature ``sum_i w_i f_i``."""
    f = _check_length(grid, f)
    return float(np.dot(grid.weights, f))


def sample_field(grid, spec, name="field"):
    """Nodal samples of a constant, an expression in x (and y), or an array."""
    if isinstance(spec, str):
        expr = Expression(spec).check_variables({"x", "y"} if grid.dim == 2 else {"x"})
        coords = grid.coordinates()
        env = {"x": coords[0]}
        if grid.dim == 2:
            env["y"] = coords[1]
        vals = np.asarray(expr(**env), dtype=float)
        return np.broadcast_to(vals, (grid.n_nodes,)).astype(float)
    if np.ndim(spec) == 0:
        return np.full(grid.n_nodes, float(spec))
    return _check_length(grid, spec, name).copy()


@dataclass(frozen=True, eq=False)
class CoefficientField:
    """Nodal a, b, c in Pi_+ and an optional perturbation weight d."""

    grid: GridDomain
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: Optional[np.ndarray] = None

    def __post_init__(self):
        for name in ("a", "b", "c", "d"):
            vec = getattr(self, name)
            if vec is None:
                continue
            vec = _check_length(self.grid, vec, name)
            if not np.all(np.isfinite(vec)):
                k = int(np.argmin(np.isfinite(vec)))
                raise DomainError(f"coefficient {name} is not finite at node {k}")
            vec = vec.copy()
            vec.setflags(write=False)
            object.__setattr__(self, name, vec)
        _check_positive(self)

    def with_d(self, d):
        return CoefficientField(self.grid, self.a, self.b, self.c,
                                sample_field(self.grid, d, "d"))


def _check_positive(coeffs):
    for name in ("a", "b", "c"):
        vec = getattr(coeffs, name)
        k = int(np.argmin(vec))
        if not vec[k] > 0:
            raise DomainError(
                f"coefficient {name} violates Pi_+ (essinf > 0): "
                f"{name}[{k}] = {vec[k]!r}")


def build_coefficients(grid, a=1.0, b=1.0, c=1.0, d=None):
    return CoefficientField(
        grid,
        sample_field(grid, a, "a"),
        sample_field(grid, b, "b"),
        sample_field(grid, c, "c"),
        None if d is None else sample_field(grid, d, "d"),
    )


@dataclass(frozen=True)
class NormBundle:
    """The norms entering the two threshold constants."""

    a_l1: float
    b_l1: float
    c_l1: float
    c_over_a_inf: float
    c_over_b_inf: float

    @classmethod
    def unit(cls):
        return cls(1.0, 1.0, 1.0, 1.0, 1.0)


def norms(coeffs):
    _check_positive(coeffs)
    grid = coeffs.grid
    return NormBundle(
        a_l1=integral(grid, np.abs(coeffs.a)),
        b_l1=integral(grid, np.abs(coeffs.b)),
        c_l1=integral(grid, np.abs(coeffs.c)),
        c_over_a_inf=float(np.max(coeffs.c / coeffs.a)),
        c_over_b_inf=float(np.max(coeffs.c / coeffs.b)),
    )
