"""Compare the compiled kernels with the numpy fallback.

    python benchmarks/bench_kernels.py [--grid 17] [--repeat 5]

Times the stencil, one preconditioned MINRES solve and a full deflated
search, once per backend, and prints a table with speedups.
"""
import argparse
import contextlib
import time
import timeit

import numpy as np

from neumannsys import _kernels
from neumannsys.discretization import DiscreteSystem
from neumannsys.domain import build_coefficients, build_uniform_grid, norms
from neumannsys.nonlinearity import catalog_log
from neumannsys.solvers import SolveConfig, deflated_search
from neumannsys.thresholds import compute_thresholds

NAMES = ("stencil_apply", "log_coupled", "log_coupled_hessian", "block_hessian_apply", "block_minres")


@contextlib.contextmanager
def backend(module):
    saved = {n: getattr(_kernels, n) for n in NAMES}
    for n in NAMES:
        setattr(_kernels, n, getattr(module, n))
    try:
        yield
    finally:
        for n, f in saved.items():
            setattr(_kernels, n, f)


def best_of(fn, repeat, number=1):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def run(module, grid_n, repeat):
    grid = build_uniform_grid(2, (1.0, 1.0), (grid_n, grid_n))
    coeffs = build_coefficients(grid)
    nl = catalog_log()
    th = compute_thresholds(nl, norms(coeffs))
    rng = np.random.default_rng(0)
    out = {}
    with backend(module):
        # new systems so no cached arrays cross backends
        system = DiscreteSystem(grid, coeffs, catalog_log(), 2.0 / th.s_F)
        w = rng.normal(size=grid.n_nodes)
        out["stencil"] = best_of(lambda: system.stiffness(w), repeat, number=200)
        x = rng.normal(size=2 * grid.n_nodes)
        H = system.linearize(x)
        rhs = rng.normal(size=2 * grid.n_nodes)
        out["minres"] = best_of(lambda: H.solve(rhs, 1e-10, 2000), repeat)
        t0 = time.perf_counter()
        sols = deflated_search(system, SolveConfig(), th)
        out["deflated_search"] = time.perf_counter() - t0
        out["n_solutions"] = len(sols)
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--grid", type=int, default=17)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _kernels.compiled_backend is None:
        print("compiled extension not built; only the numpy backend is available")
        modules = {"numpy": _kernels.numpy_backend}
    else:
        modules = {"cython": _kernels.compiled_backend, "numpy": _kernels.numpy_backend}
    results = {name: run(mod, args.grid, args.repeat) for name, mod in modules.items()}
    print(f"grid {args.grid}x{args.grid}, best of {args.repeat}")
    print(f"{'kernel':<18}" + "".join(f"{n:>14}" for n in results) + f"{'speedup':>10}")
    for key in ("stencil", "minres", "deflated_search"):
        row = [results[n][key] for n in results]
        speed = f"{row[-1] / row[0]:>9.1f}x" if len(row) == 2 else ""
        print(f"{key:<18}" + "".join(f"{t * 1e3:>11.3f} ms" for t in row) + speed)
    counts = {n: r["n_solutions"] for n, r in results.items()}
    print(f"solutions found: {counts}")


if __name__ == "__main__":
    main()
