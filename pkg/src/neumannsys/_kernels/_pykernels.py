"""Numpy implementations of the hot kernels.

Always importable; used when the compiled module is unavailable or when
``NEUMANNSYS_PURE_PYTHON=1`` is set.
"""
import numpy as np


def _neumann_second_difference(w, h, axis):
    # ghost node reflection: w[-1] := w[1], w[n] := w[n-2]
    lap = np.empty_like(w)
    w = np.moveaxis(w, axis, 0)
    out = np.moveaxis(lap, axis, 0)
    out[1:-1] = 2.0 * w[1:-1] - w[:-2] - w[2:]
    out[0] = 2.0 * (w[0] - w[1])
    out[-1] = 2.0 * (w[-1] - w[-2])
    lap /= h * h
    return lap


def stencil_apply(w, nx, ny, hx, hy, weights, coef):
    """Return ``weights * (-Lap_h w + coef * w)`` with Neumann ghost reflection.

    ``ny == 1`` selects the 1-D stencil; otherwise ``w`` is the flattened
    ``(ny, nx)`` array in x-fastest order.
    """
    w = np.asarray(w, dtype=float)
    if ny == 1:
        lap = _neumann_second_difference(w, hx, 0)
    else:
        w2 = w.reshape(ny, nx)
        lap = (_neumann_second_difference(w2, hx, 1)
               + _neumann_second_difference(w2, hy, 0)).ravel()
    return weights * (lap + coef * w)


def log_coupled(s, t):
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    st = s * t
    q = st * st
    d = 1.0 + q
    return np.log1p(q), 2.0 * st * t / d, 2.0 * st * s / d


def log_coupled_hessian(s, t):
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    st = s * t
    q = st * st
    d2 = (1.0 + q) ** 2
    return (2.0 * t * t * (1.0 - q) / d2,
            4.0 * st / d2,
            2.0 * s * s * (1.0 - q) / d2)


def block_hessian_apply(p, nx, ny, hx, hy, weights, a, b, haa, hab, hbb):
    """``[A_a 0; 0 A_b] p + [haa hab; hab hbb] p`` with nodal 2x2 blocks."""
    n = nx * ny
    pu, pv = p[:n], p[n:]
    out = np.empty(2 * n)
    out[:n] = stencil_apply(pu, nx, ny, hx, hy, weights, a) + haa * pu + hab * pv
    out[n:] = stencil_apply(pv, nx, ny, hx, hy, weights, b) + hab * pu + hbb * pv
    return out


def block_minres(rhs, nx, ny, hx, hy, weights, a, b, haa, hab, hbb,
                 pinv, rtol, maxiter):
    """Preconditioned MINRES (Paige-Saunders) for the block Hessian.

    ``pinv`` is the positive diagonal of the preconditioner inverse.  Stops
    when the preconditioned residual estimate drops below ``rtol`` times its
    initial value.  Returns ``(x, iterations, converged)``.
    """
    def op(p):
        return block_hessian_apply(p, nx, ny, hx, hy, weights, a, b, haa, hab, hbb)

    rhs = np.asarray(rhs, dtype=float)
    x = np.zeros_like(rhs)
    r1 = rhs.copy()
    y = pinv * r1
    beta1 = float(r1 @ y)
    if beta1 <= 0.0:
        return x, 0, True
    beta1 = np.sqrt(beta1)
    oldb = 0.0
    beta = beta1
    dbar = 0.0
    epsln = 0.0
    phibar = beta1
    cs, sn = -1.0, 0.0
    w = np.zeros_like(rhs)
    w2 = np.zeros_like(rhs)
    r2 = r1.copy()
    eps = np.finfo(float).eps
    itn = 0
    while itn < maxiter:
        itn += 1
        v = y / beta
        y = op(v)
        if itn >= 2:
            y -= (beta / oldb) * r1
        alfa = float(v @ y)
        y -= (alfa / beta) * r2
        r1 = r2
        r2 = y
        y = pinv * r2
        oldb = beta
        beta2 = float(r2 @ y)
        beta = np.sqrt(max(beta2, 0.0))
        oldeps = epsln
        delta = cs * dbar + sn * alfa
        gbar = sn * dbar - cs * alfa
        epsln = sn * beta
        dbar = -cs * beta
        gamma = max(np.hypot(gbar, beta), eps)
        cs = gbar / gamma
        sn = beta / gamma
        phi = cs * phibar
        phibar = sn * phibar
        w1 = w2
        w2 = w
        w = (v - oldeps * w1 - delta * w2) / gamma
        x += phi * w
        if phibar <= rtol * beta1 or beta == 0.0:
            return x, itn, True
    return x, itn, False
