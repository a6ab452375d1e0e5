# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the kernels in ``_pykernels``; same signatures."""
import numpy as np
from libc.math cimport log1p, sqrt, hypot


cdef void _stencil(const double[::1] w, double[::1] out, Py_ssize_t off,
                   Py_ssize_t nx, Py_ssize_t ny, double hx, double hy,
                   const double[::1] weights, const double[::1] coef) noexcept nogil:
    # out[off + k] = weights[k] * (-Lap_h w + coef w)[k], w read at w[off + k]
    cdef double ix2 = 1.0 / (hx * hx)
    cdef double iy2 = 1.0 / (hy * hy)
    cdef Py_ssize_t i, j, k
    cdef double lap, left, right, down, up, wk
    for j in range(ny):
        for i in range(nx):
            k = off + i + nx * j
            wk = w[k]
            left = w[k - 1] if i > 0 else w[k + 1]
            right = w[k + 1] if i < nx - 1 else w[k - 1]
            lap = (2.0 * wk - left - right) * ix2
            if ny > 1:
                down = w[k - nx] if j > 0 else w[k + nx]
                up = w[k + nx] if j < ny - 1 else w[k - nx]
                lap += (2.0 * wk - down - up) * iy2
            out[k] = weights[k - off] * (lap + coef[k - off] * wk)


cdef void _block_apply(const double[::1] p, double[::1] out,
                       Py_ssize_t nx, Py_ssize_t ny, double hx, double hy,
                       const double[::1] weights, const double[::1] a, const double[::1] b,
                       const double[::1] haa, const double[::1] hab,
                       const double[::1] hbb) noexcept nogil:
    cdef Py_ssize_t n = nx * ny
    cdef Py_ssize_t k
    _stencil(p, out, 0, nx, ny, hx, hy, weights, a)
    _stencil(p, out, n, nx, ny, hx, hy, weights, b)
    for k in range(n):
        out[k] += haa[k] * p[k] + hab[k] * p[n + k]
        out[n + k] += hab[k] * p[k] + hbb[k] * p[n + k]


def block_hessian_apply(const double[::1] p, Py_ssize_t nx, Py_ssize_t ny,
                        double hx, double hy, const double[::1] weights,
                        const double[::1] a, const double[::1] b,
                        const double[::1] haa, const double[::1] hab,
                        const double[::1] hbb):
    if p.shape[0] != 2 * nx * ny:
        raise ValueError("length mismatch")
    out_arr = np.empty(2 * nx * ny)
    cdef double[::1] out = out_arr
    _block_apply(p, out, nx, ny, hx, hy, weights, a, b, haa, hab, hbb)
    return out_arr


def block_minres(const double[::1] rhs, Py_ssize_t nx, Py_ssize_t ny,
                 double hx, double hy, const double[::1] weights,
                 const double[::1] a, const double[::1] b,
                 const double[::1] haa, const double[::1] hab, const double[::1] hbb,
                 const double[::1] pinv, double rtol, Py_ssize_t maxiter):
    cdef Py_ssize_t m = 2 * nx * ny
    if rhs.shape[0] != m or pinv.shape[0] != m:
        raise ValueError("length mismatch")
    x_arr = np.zeros(m)
    cdef double[::1] x = x_arr
    cdef double[::1] r1 = np.array(rhs, dtype=np.float64)
    cdef double[::1] r2 = np.array(rhs, dtype=np.float64)
    cdef double[::1] y = np.empty(m)
    cdef double[::1] v = np.empty(m)
    cdef double[::1] w = np.zeros(m)
    cdef double[::1] w1 = np.zeros(m)
    cdef double[::1] w2 = np.zeros(m)
    cdef double[::1] tmp
    cdef Py_ssize_t k, itn = 0
    cdef double beta1 = 0.0, beta, oldb = 0.0, dbar = 0.0, epsln = 0.0
    cdef double phibar, cs = -1.0, sn = 0.0, alfa, beta2, oldeps, delta, gbar
    cdef double gamma, phi, c1, c2
    cdef double eps = np.finfo(np.float64).eps
    cdef bint converged = False
    with nogil:
        for k in range(m):
            y[k] = pinv[k] * r1[k]
            beta1 += r1[k] * y[k]
    if beta1 <= 0.0:
        return x_arr, 0, True
    beta1 = sqrt(beta1)
    beta = beta1
    phibar = beta1
    with nogil:
        while itn < maxiter:
            itn += 1
            for k in range(m):
                v[k] = y[k] / beta
            _block_apply(v, y, nx, ny, hx, hy, weights, a, b, haa, hab, hbb)
            if itn >= 2:
                c1 = beta / oldb
                for k in range(m):
                    y[k] -= c1 * r1[k]
            alfa = 0.0
            for k in range(m):
                alfa += v[k] * y[k]
            c1 = alfa / beta
            for k in range(m):
                y[k] -= c1 * r2[k]
            # r1 <- r2, r2 <- y, y <- M r2
            tmp = r1
            r1 = r2
            r2 = tmp
            beta2 = 0.0
            for k in range(m):
                r2[k] = y[k]
                y[k] = pinv[k] * r2[k]
                beta2 += r2[k] * y[k]
            oldb = beta
            beta = sqrt(beta2) if beta2 > 0.0 else 0.0
            oldeps = epsln
            delta = cs * dbar + sn * alfa
            gbar = sn * dbar - cs * alfa
            epsln = sn * beta
            dbar = -cs * beta
            gamma = hypot(gbar, beta)
            if gamma < eps:
                gamma = eps
            cs = gbar / gamma
            sn = beta / gamma
            phi = cs * phibar
            phibar = sn * phibar
            c1 = oldeps
            c2 = delta
            # w1 <- w2, w2 <- w, w <- (v - oldeps w1 - delta w2) / gamma
            tmp = w1
            w1 = w2
            w2 = w
            w = tmp
            for k in range(m):
                w[k] = (v[k] - c1 * w1[k] - c2 * w2[k]) / gamma
                x[k] += phi * w[k]
            if phibar <= rtol * beta1 or beta == 0.0:
                converged = True
                break
    return x_arr, itn, converged


def stencil_apply(const double[::1] w, Py_ssize_t nx, Py_ssize_t ny,
                  double hx, double hy,
                  const double[::1] weights, const double[::1] coef):
    cdef Py_ssize_t n = nx * ny
    if w.shape[0] != n or weights.shape[0] != n or coef.shape[0] != n:
        raise ValueError("length mismatch")
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    _stencil(w, out, 0, nx, ny, hx, hy, weights, coef)
    return out_arr


def log_coupled(s_in, t_in):
    cdef const double[::1] s = np.ascontiguousarray(s_in, dtype=np.float64).ravel()
    cdef const double[::1] t = np.ascontiguousarray(t_in, dtype=np.float64).ravel()
    cdef Py_ssize_t n = s.shape[0]
    if t.shape[0] != n:
        raise ValueError("length mismatch")
    f_arr = np.empty(n)
    fs_arr = np.empty(n)
    ft_arr = np.empty(n)
    cdef double[::1] f = f_arr
    cdef double[::1] fs = fs_arr
    cdef double[::1] ft = ft_arr
    cdef Py_ssize_t k
    cdef double st, q, d
    for k in range(n):
        st = s[k] * t[k]
        q = st * st
        d = 1.0 + q
        f[k] = log1p(q)
        fs[k] = 2.0 * st * t[k] / d
        ft[k] = 2.0 * st * s[k] / d
    shape = np.shape(s_in)
    return f_arr.reshape(shape), fs_arr.reshape(shape), ft_arr.reshape(shape)


def log_coupled_hessian(s_in, t_in):
    cdef const double[::1] s = np.ascontiguousarray(s_in, dtype=np.float64).ravel()
    cdef const double[::1] t = np.ascontiguousarray(t_in, dtype=np.float64).ravel()
    cdef Py_ssize_t n = s.shape[0]
    if t.shape[0] != n:
        raise ValueError("length mismatch")
    ss_arr = np.empty(n)
    st_arr = np.empty(n)
    tt_arr = np.empty(n)
    cdef double[::1] fss = ss_arr
    cdef double[::1] fst = st_arr
    cdef double[::1] ftt = tt_arr
    cdef Py_ssize_t k
    cdef double p, q, d2
    for k in range(n):
        p = s[k] * t[k]
        q = p * p
        d2 = (1.0 + q) * (1.0 + q)
        fss[k] = 2.0 * t[k] * t[k] * (1.0 - q) / d2
        fst[k] = 4.0 * p / d2
        ftt[k] = 2.0 * s[k] * s[k] * (1.0 - q) / d2
    shape = np.shape(s_in)
    return ss_arr.reshape(shape), st_arr.reshape(shape), tt_arr.reshape(shape)
