# cython: boundscheck=False, wraparound=False, cdivision=True
"""Fused single-pass versions of the row-wise kernels.

Same contracts as loglens.kernels._reference; the win over NumPy comes from
avoiding the per-pass temporaries on small rows (n is 64..512 here).
"""

import numpy as np

from libc.math cimport INFINITY, exp, sqrt


def softmax_rows(x):
    cdef double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t m = xv.shape[0], n = xv.shape[1]
    out = np.empty((m, n), dtype=np.float64)
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t i, j
    cdef double rowmax, s, v
    with nogil:
        for i in range(m):
            rowmax = -INFINITY
            for j in range(n):
                if xv[i, j] > rowmax:
                    rowmax = xv[i, j]
            if rowmax == -INFINITY:
                # fully masked row: match the reference's uniform fallback
                for j in range(n):
                    ov[i, j] = 1.0 / n
                continue
            s = 0.0
            for j in range(n):
                v = exp(xv[i, j] - rowmax)
                ov[i, j] = v
                s += v
            for j in range(n):
                ov[i, j] /= s
    return out


def softmax_rows_grad(p, dy):
    cdef double[:, ::1] pv = np.ascontiguousarray(p, dtype=np.float64)
    cdef double[:, ::1] dyv = np.ascontiguousarray(dy, dtype=np.float64)
    cdef Py_ssize_t m = pv.shape[0], n = pv.shape[1]
    out = np.empty((m, n), dtype=np.float64)
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t i, j
    cdef double s
    with nogil:
        for i in range(m):
            s = 0.0
            for j in range(n):
                s += pv[i, j] * dyv[i, j]
            for j in range(n):
                ov[i, j] = pv[i, j] * (dyv[i, j] - s)
    return out


def layer_norm_rows(x, gamma, beta, eps):
    cdef double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[::1] gv = np.ascontiguousarray(gamma, dtype=np.float64)
    cdef double[::1] bv = np.ascontiguousarray(beta, dtype=np.float64)
    cdef Py_ssize_t m = xv.shape[0], n = xv.shape[1]
    y = np.empty((m, n), dtype=np.float64)
    mean = np.empty(m, dtype=np.float64)
    rstd = np.empty(m, dtype=np.float64)
    cdef double[:, ::1] yv = y
    cdef double[::1] mv = mean
    cdef double[::1] rv = rstd
    cdef Py_ssize_t i, j
    cdef double mu, var, d, r
    cdef double epsv = eps
    with nogil:
        for i in range(m):
            mu = 0.0
            for j in range(n):
                mu += xv[i, j]
            mu /= n
            var = 0.0
            for j in range(n):
                d = xv[i, j] - mu
                var += d * d
            var /= n
            r = 1.0 / sqrt(var + epsv)
            mv[i] = mu
            rv[i] = r
            for j in range(n):
                yv[i, j] = (xv[i, j] - mu) * r * gv[j] + bv[j]
    return y, mean, rstd


def layer_norm_rows_grad(x, mean, rstd, gamma, dy):
    cdef double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[::1] mv = np.ascontiguousarray(mean, dtype=np.float64)
    cdef double[::1] rv = np.ascontiguousarray(rstd, dtype=np.float64)
    cdef double[::1] gv = np.ascontiguousarray(gamma, dtype=np.float64)
    cdef double[:, ::1] dyv = np.ascontiguousarray(dy, dtype=np.float64)
    cdef Py_ssize_t m = xv.shape[0], n = xv.shape[1]
    dx = np.empty((m, n), dtype=np.float64)
    dgamma = np.zeros(n, dtype=np.float64)
    dbeta = np.zeros(n, dtype=np.float64)
    cdef double[:, ::1] dxv = dx
    cdef double[::1] dgv = dgamma
    cdef double[::1] dbv = dbeta
    cdef Py_ssize_t i, j
    cdef double mu, r, xhat, dxhat, s1, s2
    with nogil:
        for i in range(m):
            mu = mv[i]
            r = rv[i]
            s1 = 0.0
            s2 = 0.0
            for j in range(n):
                xhat = (xv[i, j] - mu) * r
                dxhat = dyv[i, j] * gv[j]
                s1 += dxhat
                s2 += dxhat * xhat
                dgv[j] += dyv[i, j] * xhat
                dbv[j] += dyv[i, j]
            s1 /= n
            s2 /= n
            for j in range(n):
                xhat = (xv[i, j] - mu) * r
                dxv[i, j] = (dyv[i, j] * gv[j] - s1 - xhat * s2) * r
    return dx, dgamma, dbeta
