"""Finite-difference gradient checking for tape-built scalar losses."""

import math

import numpy as np

from .autodiff import backward
from .errors import NumericError


def grad_check(f, params, eps=1e-5):
    """Compare analytic gradients of f against central finite differences.

    f is a zero-argument callable returning a scalar Tensor built from
    `params` (a sequence of Param); it must be deterministic, since it is
    re-evaluated at perturbed parameter points. Returns the maximum relative
    error |a - n| / max(|a|, |n|, 1e-8) over every parameter element.
    """
    if not 0.0 < eps <= 1e-2:
        raise ValueError(f"eps must be in (0, 1e-2], got {eps}")

    for p in params:
        p.zero_grad()
    out = f()
    if not np.isfinite(out.value):
        raise NumericError("grad_check: f evaluated to a non-finite value")
    backward(out)
    analytic = [p.grad.copy() for p in params]

    max_rel = 0.0
    for p, grads in zip(params, analytic):
        flat_value = p.value.reshape(-1)
        flat_grad = grads.reshape(-1)
        for i in range(flat_value.size):
            orig = flat_value[i]
            flat_value[i] = orig + eps
            f_plus = float(f().value)
            flat_value[i] = orig - eps
            f_minus = float(f().value)
            flat_value[i] = orig
            if not (math.isfinite(f_plus) and math.isfinite(f_minus)):
                raise NumericError("grad_check: f non-finite at a perturbed point")
            numeric = (f_plus - f_minus) / (2.0 * eps)
            a = flat_grad[i]
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            if rel > max_rel:
                max_rel = rel
    return max_rel
