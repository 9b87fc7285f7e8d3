"""Minimal reverse-mode automatic differentiation over float64 ndarrays.

Each operation returns a Tensor holding the forward value plus a closure
that maps the output gradient to the input gradients. backward() walks the
tape in reverse topological order. Leaf parameters (Param) keep a persistent
grad array that accumulates across backward calls until zero_grad().

Row-wise conventions: softmax and layer norm act on the last axis; matmul
follows numpy stacking rules (leading axes broadcast).
"""

import numpy as np

from . import kernels
from .errors import ShapeError

CE_CLAMP = 1e-12


class Tensor:
    __slots__ = ("value", "grad", "_parents", "_vjp")

    def __init__(self, value, _parents=(), _vjp=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self._parents = _parents
        self._vjp = _vjp

    @property
    def shape(self):
        return self.value.shape


class Param(Tensor):
    """Trainable leaf: value plus a persistent gradient accumulator."""

    def __init__(self, value):
        super().__init__(np.array(value, dtype=np.float64))
        self.grad = np.zeros_like(self.value)

    def zero_grad(self):
        self.grad.fill(0.0)


def _unbroadcast(g, shape):
    """Sum g down to `shape`, undoing numpy broadcasting."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def backward(root):
    """Accumulate d(root)/d(leaf) into every reachable Tensor's .grad."""
    if root.value.shape != ():
        raise ShapeError(f"backward requires a scalar, got shape {root.value.shape}")

    topo = []
    seen = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))

    root.grad = np.ones((), dtype=np.float64)
    for node in reversed(topo):
        if node._vjp is None or node.grad is None:
            continue
        for parent, g in zip(node._parents, node._vjp(node.grad)):
            if g is None:
                continue
            if isinstance(parent, Param):
                parent.grad += g
            elif parent.grad is None:
                parent.grad = g
            else:
                parent.grad = parent.grad + g


def matmul(a, b):
    value = a.value @ b.value

    def vjp(dy):
        da = _unbroadcast(dy @ np.swapaxes(b.value, -1, -2), a.value.shape)
        db = _unbroadcast(np.swapaxes(a.value, -1, -2) @ dy, b.value.shape)
        return da, db

    return Tensor(value, (a, b), vjp)


def add(a, b):
    value = a.value + b.value

    def vjp(dy):
        return _unbroadcast(dy, a.value.shape), _unbroadcast(dy, b.value.shape)

    return Tensor(value, (a, b), vjp)


def add_const(a, c):
    """Add a constant array (no gradient flows into c)."""
    value = a.value + c
    if value.shape != a.value.shape:
        raise ShapeError(f"constant {np.shape(c)} must not grow operand {a.value.shape}")
    return Tensor(value, (a,), lambda dy: (dy,))


def mul_const(a, c):
    value = a.value * c
    if value.shape != a.value.shape:
        raise ShapeError(f"constant {np.shape(c)} must not grow operand {a.value.shape}")
    return Tensor(value, (a,), lambda dy: (dy * c,))


def relu(a):
    mask = a.value > 0

    def vjp(dy):
        return (dy * mask,)

    return Tensor(np.maximum(a.value, 0.0), (a,), vjp)


def _rows(x):
    n = x.shape[-1]
    return np.ascontiguousarray(x).reshape(-1, n)


def softmax_last(a):
    shape = a.value.shape
    p2 = kernels.softmax_rows(_rows(a.value))

    def vjp(dy):
        dx = kernels.softmax_rows_grad(p2, _rows(dy))
        return (dx.reshape(shape),)

    return Tensor(p2.reshape(shape), (a,), vjp)


def layer_norm_last(x, gamma, beta, eps=1e-5):
    """Fused layer norm over the last axis; gamma/beta are (1, n) Params."""
    shape = x.value.shape
    x2 = _rows(x.value)
    y2, mean, rstd = kernels.layer_norm_rows(x2, gamma.value[0], beta.value[0], eps)

    def vjp(dy):
        dx, dgamma, dbeta = kernels.layer_norm_rows_grad(
            x2, mean, rstd, gamma.value[0], _rows(dy)
        )
        return dx.reshape(shape), dgamma.reshape(1, -1), dbeta.reshape(1, -1)

    return Tensor(y2.reshape(shape), (x, gamma, beta), vjp)


def embedding(table, ids):
    """Row lookup: ids (…,) int array -> (…, d) from a (vocab, d) table."""
    ids = np.asarray(ids)
    value = table.value[ids]

    def vjp(dy):
        dtable = np.zeros_like(table.value)
        np.add.at(dtable, ids, dy)
        return (dtable,)

    return Tensor(value, (table,), vjp)


def split_heads(x, n_heads):
    """(B, L, D) -> (B, H, L, D/H)."""
    b, l, d = x.value.shape
    dk = d // n_heads
    value = np.ascontiguousarray(x.value.reshape(b, l, n_heads, dk).transpose(0, 2, 1, 3))

    def vjp(dy):
        return (dy.transpose(0, 2, 1, 3).reshape(b, l, d),)

    return Tensor(value, (x,), vjp)


def merge_heads(x):
    """(B, H, L, D/H) -> (B, L, D)."""
    b, h, l, dk = x.value.shape
    value = np.ascontiguousarray(x.value.transpose(0, 2, 1, 3)).reshape(b, l, h * dk)

    def vjp(dy):
        return (np.ascontiguousarray(dy.reshape(b, l, h, dk).transpose(0, 2, 1, 3)),)

    return Tensor(value, (x,), vjp)


def swap_last2(x):
    def vjp(dy):
        return (np.swapaxes(dy, -1, -2),)

    return Tensor(np.swapaxes(x.value, -1, -2), (x,), vjp)


def masked_mean_rows(x, mask):
    """Mean of x (B, L, D) over the rows where mask (B, L) is True."""
    counts = mask.sum(axis=1)
    if (counts == 0).any():
        raise ShapeError("masked_mean_rows: some sequence has no unmasked rows")
    weights = mask.astype(np.float64) / counts[:, None]
    value = np.einsum("bld,bl->bd", x.value, weights)

    def vjp(dy):
        return (dy[:, None, :] * weights[:, :, None],)

    return Tensor(value, (x,), vjp)


def dropout(x, rate, rng):
    """Inverted dropout; identity when rate == 0."""
    if rate == 0.0:
        return x
    keep = rng.random(x.value.shape) >= rate
    scale = keep / (1.0 - rate)

    def vjp(dy):
        return (dy * scale,)

    return Tensor(x.value * scale, (x,), vjp)


def cross_entropy_mean(probs, classes):
    """Mean of -ln(max(p_class, clamp)) over a (B, C) probability Tensor."""
    classes = np.asarray(classes)
    b = probs.value.shape[0]
    rows = np.arange(b)
    p_sel = probs.value[rows, classes]
    clamped = np.maximum(p_sel, CE_CLAMP)
    value = -np.log(clamped).mean()

    def vjp(dy):
        dp = np.zeros_like(probs.value)
        dp[rows, classes] = np.where(p_sel >= CE_CLAMP, -float(dy) / (b * clamped), 0.0)
        return (dp,)

    return Tensor(value, (probs,), vjp)


def sum_all(x):
    def vjp(dy):
        return (np.full(x.value.shape, float(dy)),)

    return Tensor(x.value.sum(), (x,), vjp)
