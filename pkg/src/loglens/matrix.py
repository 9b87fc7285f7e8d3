"""Dense real-matrix operations.

A matrix here is a 2-D float64 C-order ndarray (rows x cols, row-major).
Public operations validate shapes, delegate the row-wise work to
loglens.kernels, and guarantee finite outputs.
"""

import numpy as np

from . import kernels
from .errors import NumericError, ShapeError


def as_matrix(values, name="matrix"):
    """Coerce to a 2-D float64 array; rejects empty and non-2-D input."""
    m = np.asarray(values, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got ndim={m.ndim}")
    if m.shape[0] < 1 or m.shape[1] < 1:
        raise ShapeError(f"{name} must be nonempty, got shape {m.shape}")
    return m


def _check_finite(m, op):
    if not np.isfinite(m).all():
        raise NumericError(f"{op} produced non-finite values")
    return m


def matmul(a, b):
    """Standard matrix product; shapes (i,k) x (k,j) -> (i,j)."""
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    return _check_finite(a @ b, "matmul")


def softmax_rows(m):
    """Row-wise softmax with max-subtraction; each output row sums to 1."""
    m = as_matrix(m)
    return _check_finite(kernels.softmax_rows(m), "softmax_rows")


def layer_norm(m, gamma, beta, eps=1e-5):
    """Normalize each row to mean 0 / variance 1, then scale and shift.

    gamma and beta are 1 x cols row vectors; eps keeps the zero-variance
    case defined.
    """
    m = as_matrix(m)
    gamma = as_matrix(gamma, "gamma")
    beta = as_matrix(beta, "beta")
    if gamma.shape != (1, m.shape[1]) or beta.shape != (1, m.shape[1]):
        raise ShapeError(
            f"gamma/beta must be (1, {m.shape[1]}), got {gamma.shape} and {beta.shape}"
        )
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    y, _, _ = kernels.layer_norm_rows(m, gamma[0], beta[0], eps)
    return _check_finite(y, "layer_norm")


def relu(m):
    """Elementwise max(0, x)."""
    m = as_matrix(m)
    return np.maximum(m, 0.0)
