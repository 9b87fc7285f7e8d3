"""Row-wise compute kernels with a compiled fast path.

Two interchangeable backends provide the fused softmax and layer-norm
forward/backward routines that dominate training time:

* ``native`` -- Cython extension (built at install time when a compiler is
  available),
* ``python`` -- pure NumPy reference.

The backend is chosen at import: ``native`` when the extension imported,
otherwise ``python``. Set ``LOGLENS_KERNELS=python`` (or ``native``) to force
one, or call :func:`use_backend` at runtime (used by the benchmark and the
parity tests). Both backends compute the same quantities; results agree to
float64 rounding, not bit-exactly.
"""

import os

from . import _reference

_BACKENDS = {"python": _reference}

try:
    from . import _fastpath

    _BACKENDS["native"] = _fastpath
except ImportError:
    pass

_active_name = os.environ.get("LOGLENS_KERNELS")
if _active_name is None:
    _active_name = "native" if "native" in _BACKENDS else "python"
if _active_name not in _BACKENDS:
    raise ImportError(
        f"LOGLENS_KERNELS={_active_name!r} but available backends are "
        f"{sorted(_BACKENDS)}"
    )
_active = _BACKENDS[_active_name]


def available_backends():
    return sorted(_BACKENDS)


def backend_name():
    return _active_name


def use_backend(name):
    """Switch the active backend; returns the previous backend name."""
    global _active, _active_name
    if name not in _BACKENDS:
        raise ValueError(f"unknown kernel backend {name!r}; have {sorted(_BACKENDS)}")
    previous = _active_name
    _active_name = name
    _active = _BACKENDS[name]
    return previous


def softmax_rows(x):
    return _active.softmax_rows(x)


def softmax_rows_grad(p, dy):
    return _active.softmax_rows_grad(p, dy)


def layer_norm_rows(x, gamma, beta, eps):
    return _active.layer_norm_rows(x, gamma, beta, eps)


def layer_norm_rows_grad(x, mean, rstd, gamma, dy):
    return _active.layer_norm_rows_grad(x, mean, rstd, gamma, dy)
