import numpy as np
import pytest

from neumannsys import _kernels
from neumannsys._kernels import numpy_backend

backends = [pytest.param(numpy_backend, id="numpy")]
if _kernels.compiled_backend is not None:
    backends.append(pytest.param(_kernels.compiled_backend, id="cython"))


def _problem(rng, nx, ny):
    n = nx * ny
    hx, hy = 1.0 / (nx - 1), (1.0 / (ny - 1) if ny > 1 else 1.0)
    wx = np.full(nx, hx)
    wx[[0, -1]] *= 0.5
    if ny > 1:
        wy = np.full(ny, hy)
        wy[[0, -1]] *= 0.5
        w = np.outer(wy, wx).ravel()
    else:
        w = wx
    a = rng.uniform(0.5, 2.0, n)
    b = rng.uniform(0.5, 2.0, n)
    haa, hab, hbb = rng.normal(0, 0.3, (3, n)) * w
    return n, hx, hy, w, a, b, haa, hab, hbb


def test_active_backend_is_known():
    assert _kernels.BACKEND in ("cython", "numpy")


@pytest.mark.parametrize("be", backends)
@pytest.mark.parametrize("nx, ny", [(9, 1), (7, 5)])
def test_stencil_matches_numpy_twin(be, nx, ny, rng):
    n, hx, hy, w, a, *_ = _problem(rng, nx, ny)
    x = rng.normal(size=n)
    ref = numpy_backend.stencil_apply(x, nx, ny, hx, hy, w, a)
    np.testing.assert_allclose(be.stencil_apply(x, nx, ny, hx, hy, w, a), ref, rtol=1e-13, atol=1e-13)


@pytest.mark.parametrize("be", backends)
def test_log_coupled_terms(be, rng):
    s, t = rng.uniform(-5, 5, (2, 64))
    for got, ref in zip(be.log_coupled(s, t), numpy_backend.log_coupled(s, t)):
        np.testing.assert_allclose(got, ref, rtol=1e-14)
    for got, ref in zip(be.log_coupled_hessian(s, t), numpy_backend.log_coupled_hessian(s, t)):
        np.testing.assert_allclose(got, ref, rtol=1e-14, atol=1e-15)


@pytest.mark.parametrize("be", backends)
def test_block_minres_solves(be, rng):
    nx, ny = 9, 7
    n, hx, hy, w, a, b, haa, hab, hbb = _problem(rng, nx, ny)
    args = (nx, ny, hx, hy, w, a, b, haa, hab, hbb)
    x_true = rng.normal(size=2 * n)
    rhs = be.block_hessian_apply(x_true, *args)
    np.testing.assert_allclose(rhs, numpy_backend.block_hessian_apply(x_true, *args), rtol=1e-12, atol=1e-13)
    pinv = np.ones(2 * n)
    x, itn, ok = be.block_minres(rhs, *args, pinv, 1e-12, 2000)
    assert ok and itn > 0
    np.testing.assert_allclose(x, x_true, rtol=1e-6, atol=1e-7)


@pytest.mark.parametrize("be", backends)
def test_block_operator_is_symmetric(be, rng):
    nx, ny = 6, 5
    n, hx, hy, w, a, b, haa, hab, hbb = _problem(rng, nx, ny)
    args = (nx, ny, hx, hy, w, a, b, haa, hab, hbb)
    M = np.column_stack([be.block_hessian_apply(e, *args) for e in np.eye(2 * n)])
    assert np.max(np.abs(M - M.T)) <= 1e-12 * np.max(np.abs(M))


def test_env_var_forces_numpy_fallback():
    import os
    import subprocess
    import sys
    env = dict(os.environ, NEUMANNSYS_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import neumannsys; print(neumannsys.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
