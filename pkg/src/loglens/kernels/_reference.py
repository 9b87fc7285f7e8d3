"""NumPy reference implementations of the row-wise kernels.

These are the fallback backend and the correctness oracle for the compiled
fast path. All functions take float64 arrays; `x` is (m, n) with one
independent problem per row, gamma/beta are flat (n,) vectors.
"""

import numpy as np


def softmax_rows(x):
    m = np.max(x, axis=1, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    e = np.exp(x - m)
    s = e.sum(axis=1, keepdims=True)
    dead = s == 0.0
    if dead.any():
        # rows that are entirely -inf (fully masked): fall back to uniform
        e = np.where(dead, 1.0, e)
        s = np.where(dead, float(x.shape[1]), s)
    return e / s


def softmax_rows_grad(p, dy):
    s = (p * dy).sum(axis=1, keepdims=True)
    return p * (dy - s)


def layer_norm_rows(x, gamma, beta, eps):
    mean = x.mean(axis=1)
    var = x.var(axis=1)
    rstd = 1.0 / np.sqrt(var + eps)
    xhat = (x - mean[:, None]) * rstd[:, None]
    y = xhat * gamma + beta
    return y, mean, rstd


def layer_norm_rows_grad(x, mean, rstd, gamma, dy):
    xhat = (x - mean[:, None]) * rstd[:, None]
    dbeta = dy.sum(axis=0)
    dgamma = (dy * xhat).sum(axis=0)
    dxhat = dy * gamma
    mean_dxhat = dxhat.mean(axis=1, keepdims=True)
    mean_dxhat_xhat = (dxhat * xhat).mean(axis=1, keepdims=True)
    dx = (dxhat - mean_dxhat - xhat * mean_dxhat_xhat) * rstd[:, None]
    return dx, dgamma, dbeta
