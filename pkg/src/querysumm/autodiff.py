"""Minimal reverse-mode automatic differentiation on numpy arrays.

A ``Tensor`` wraps an ndarray plus an optional gradient and a closure that
pushes incoming gradients to its parents.  Graphs are built eagerly by the
primitive functions below and differentiated by ``backward``, which walks
the (acyclic) parent graph in reverse topological order.

Training runs in float32; gradient checking runs the same code in float64,
where central finite differences are meaningful.  The dtype is fixed by the
leaf tensors (parameters and inputs) and propagates through numpy promotion.
"""

from __future__ import annotations

import numpy as np


class ShapeError(ValueError):
    """Raised when primitive operands have incompatible shapes."""


def _shape_check(ok: bool, op: str, *shapes):
    if not ok:
        raise ShapeError(f"{op}: incompatible shapes {[tuple(s) for s in shapes]}")


class Tensor:
    __slots__ = ("values", "grad", "parents", "backward_fn", "requires_grad")

    def __init__(self, values, parents=(), backward_fn=None, requires_grad=None):
        self.values = np.asarray(values)
        self.parents = tuple(parents)
        self.backward_fn = backward_fn
        if requires_grad is None:
            requires_grad = any(p.requires_grad for p in self.parents)
        self.requires_grad = requires_grad
        self.grad = None

    @property
    def shape(self):
        return self.values.shape

    @property
    def dtype(self):
        return self.values.dtype

    def item(self) -> float:
        return float(self.values)

    def __repr__(self):
        return f"Tensor(shape={self.values.shape}, dtype={self.values.dtype})"


def tensor(values, dtype=np.float32) -> Tensor:
    """Leaf constant; carries no gradient."""
    return Tensor(np.asarray(values, dtype=dtype), requires_grad=False)


def parameter(values, dtype=np.float32) -> Tensor:
    """Leaf tensor that accumulates gradients."""
    return Tensor(np.array(values, dtype=dtype), requires_grad=True)


def _accumulate(t: Tensor, g: np.ndarray):
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.values)
    t.grad += g


def _topo_order(root: Tensor) -> list[Tensor]:
    order, seen, stack = [], set(), [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(root: Tensor, grad=None) -> None:
    """Accumulate d(root)/d(leaf) into every reachable ``requires_grad``
    leaf.  ``grad`` seeds the root cotangent (defaults to ones)."""
    if not root.requires_grad:
        return
    if grad is None:
        grad = np.ones_like(root.values)
    root.grad = np.asarray(grad, dtype=root.values.dtype) + (
        0 if root.grad is None else root.grad
    )
    for node in reversed(_topo_order(root)):
        if node.backward_fn is not None and node.grad is not None:
            node.backward_fn(node.grad)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``g`` down to ``shape`` along broadcast axes."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# --- arithmetic -------------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    try:
        out_values = a.values + b.values
    except ValueError:
        _shape_check(False, "add", a.shape, b.shape)
    out = Tensor(out_values, parents=(a, b))

    def bw(g):
        _accumulate(a, _unbroadcast(g, a.shape))
        _accumulate(b, _unbroadcast(g, b.shape))

    out.backward_fn = bw
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    try:
        out_values = a.values * b.values
    except ValueError:
        _shape_check(False, "mul", a.shape, b.shape)
    out = Tensor(out_values, parents=(a, b))

    def bw(g):
        _accumulate(a, _unbroadcast(g * b.values, a.shape))
        _accumulate(b, _unbroadcast(g * a.values, b.shape))

    out.backward_fn = bw
    return out


def scale(a: Tensor, c: float) -> Tensor:
    out = Tensor(a.values * c, parents=(a,))
    out.backward_fn = lambda g: _accumulate(a, g * c)
    return out


def sub(a: Tensor, b: Tensor) -> Tensor:
    return add(a, scale(b, -1.0))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product.  Leading (batch) dims must match exactly unless ``b``
    is 2-D, in which case it is shared across the batch."""
    av, bv = a.values, b.values
    _shape_check(av.ndim >= 2 and bv.ndim >= 2, "matmul", av.shape, bv.shape)
    _shape_check(av.shape[-1] == bv.shape[-2], "matmul", av.shape, bv.shape)
    _shape_check(
        bv.ndim == 2 or av.shape[:-2] == bv.shape[:-2], "matmul", av.shape, bv.shape
    )
    out = Tensor(av @ bv, parents=(a, b))

    def bw(g):
        _accumulate(a, g @ bv.swapaxes(-1, -2))
        if bv.ndim == 2 and av.ndim > 2:
            _accumulate(
                b, av.reshape(-1, av.shape[-1]).T @ g.reshape(-1, g.shape[-1])
            )
        else:
            _accumulate(b, av.swapaxes(-1, -2) @ g)

    out.backward_fn = bw
    return out


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Affine map on the last axis: ``x @ weight + bias`` with ``weight``
    shaped (in, out)."""
    _shape_check(
        x.shape[-1] == weight.shape[0], "linear", x.shape, weight.shape
    )
    out_values = x.values @ weight.values
    if bias is not None:
        out_values = out_values + bias.values
    parents = (x, weight) if bias is None else (x, weight, bias)
    out = Tensor(out_values, parents=parents)

    def bw(g):
        _accumulate(x, g @ weight.values.T)
        g2 = g.reshape(-1, g.shape[-1])
        _accumulate(weight, x.values.reshape(-1, x.shape[-1]).T @ g2)
        if bias is not None:
            _accumulate(bias, g2.sum(axis=0))

    out.backward_fn = bw
    return out


# --- shape plumbing ---------------------------------------------------------


def reshape(a: Tensor, shape) -> Tensor:
    out = Tensor(a.values.reshape(shape), parents=(a,))
    out.backward_fn = lambda g: _accumulate(a, g.reshape(a.shape))
    return out


def swapaxes(a: Tensor, axis1: int, axis2: int) -> Tensor:
    out = Tensor(a.values.swapaxes(axis1, axis2), parents=(a,))
    out.backward_fn = lambda g: _accumulate(a, g.swapaxes(axis1, axis2))
    return out


def concat(tensors: list[Tensor], axis: int) -> Tensor:
    _shape_check(len(tensors) >= 1, "concat")
    out = Tensor(
        np.concatenate([t.values for t in tensors], axis=axis), parents=tuple(tensors)
    )
    sizes = [t.shape[axis] for t in tensors]

    def bw(g):
        offset = 0
        for t, size in zip(tensors, sizes):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(offset, offset + size)
            _accumulate(t, g[tuple(idx)])
            offset += size

    out.backward_fn = bw
    return out


def split(a: Tensor, sizes: list[int], axis: int) -> list[Tensor]:
    """Inverse of ``concat``: cut ``a`` into consecutive blocks of the given
    sizes along ``axis``."""
    _shape_check(sum(sizes) == a.shape[axis], "split", a.shape)
    outs = []
    offset = 0
    for size in sizes:
        idx = [slice(None)] * a.values.ndim
        idx[axis] = slice(offset, offset + size)
        piece = Tensor(a.values[tuple(idx)], parents=(a,))

        def bw(g, idx=tuple(idx)):
            full = np.zeros_like(a.values)
            full[idx] = g
            _accumulate(a, full)

        piece.backward_fn = bw
        outs.append(piece)
        offset += size
    return outs


# --- nonlinearities ---------------------------------------------------------


def relu(a: Tensor) -> Tensor:
    out = Tensor(np.maximum(a.values, 0), parents=(a,))
    out.backward_fn = lambda g: _accumulate(a, g * (a.values > 0))
    return out


def tanh(a: Tensor) -> Tensor:
    out_values = np.tanh(a.values)
    out = Tensor(out_values, parents=(a,))
    out.backward_fn = lambda g: _accumulate(a, g * (1.0 - out_values**2))
    return out


def sin(a: Tensor) -> Tensor:
    out = Tensor(np.sin(a.values), parents=(a,))
    out.backward_fn = lambda g: _accumulate(a, g * np.cos(a.values))
    return out


def cos(a: Tensor) -> Tensor:
    out = Tensor(np.cos(a.values), parents=(a,))
    out.backward_fn = lambda g: _accumulate(a, g * -np.sin(a.values))
    return out


def softmax(a: Tensor, mask: np.ndarray | None = None) -> Tensor:
    """Softmax over the last axis.

    ``mask`` is boolean, broadcastable to ``a``; masked positions get
    probability exactly 0.  Rows with no valid position come out all-zero
    rather than NaN.
    """
    x = a.values
    if mask is not None:
        mask = np.broadcast_to(np.asarray(mask, dtype=bool), x.shape)
        x = np.where(mask, x, -np.inf)
    x_max = np.max(x, axis=-1, keepdims=True)
    x_max = np.where(np.isfinite(x_max), x_max, 0.0)
    e = np.exp(x - x_max)
    z = e.sum(axis=-1, keepdims=True)
    p = np.where(z > 0, e / np.where(z > 0, z, 1.0), 0.0)
    out = Tensor(p, parents=(a,))

    def bw(g):
        inner = (g * p).sum(axis=-1, keepdims=True)
        _accumulate(a, p * (g - inner))

    out.backward_fn = bw
    return out


def layer_norm(a: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-6) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then apply a
    learned elementwise gain and bias."""
    dim = a.shape[-1]
    _shape_check(
        gain.shape == (dim,) and bias.shape == (dim,),
        "layer_norm",
        a.shape,
        gain.shape,
        bias.shape,
    )
    x = a.values
    mu = x.mean(axis=-1, keepdims=True)
    var = ((x - mu) ** 2).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu) * inv
    out = Tensor(xhat * gain.values + bias.values, parents=(a, gain, bias))

    def bw(g):
        dxhat = g * gain.values
        dx = inv * (
            dxhat
            - dxhat.mean(axis=-1, keepdims=True)
            - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
        )
        _accumulate(a, dx)
        _accumulate(gain, (g * xhat).reshape(-1, dim).sum(axis=0))
        _accumulate(bias, g.reshape(-1, dim).sum(axis=0))

    out.backward_fn = bw
    return out


def dropout(a: Tensor, rate: float, rng: np.random.Generator | None, train: bool) -> Tensor:
    """Inverted dropout: scales kept activations by 1/(1-rate) at train time
    so evaluation is the identity."""
    if not train or rate == 0.0:
        return a
    if rng is None:
        raise ValueError("dropout in train mode needs an rng")
    keep = (rng.random(a.shape) >= rate).astype(a.values.dtype) / (1.0 - rate)
    out = Tensor(a.values * keep, parents=(a,))
    out.backward_fn = lambda g: _accumulate(a, g * keep)
    return out


# --- embeddings and loss ----------------------------------------------------


def embedding_lookup(table: Tensor, ids: np.ndarray) -> Tensor:
    """Gather rows of ``table`` (vocab, dim) by integer ids of any shape."""
    ids = np.asarray(ids)
    _shape_check(table.values.ndim == 2, "embedding_lookup", table.shape)
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise IndexError("embedding_lookup: id out of range")
    out = Tensor(table.values[ids], parents=(table,))

    def bw(g):
        if not table.requires_grad:
            return
        if table.grad is None:
            table.grad = np.zeros_like(table.values)
        np.add.at(table.grad, ids, g)

    out.backward_fn = bw
    return out


def log_softmax_values(x: np.ndarray) -> np.ndarray:
    m = x.max(axis=-1, keepdims=True)
    return x - m - np.log(np.exp(x - m).sum(axis=-1, keepdims=True))


def cross_entropy_sum(
    logits: Tensor, targets: np.ndarray, ignore_id: int | None = None
) -> tuple[Tensor, int]:
    """Summed token negative log-likelihood over rows whose target is not
    ``ignore_id``.  Returns ``(loss_sum, counted_tokens)``."""
    targets = np.asarray(targets)
    _shape_check(
        logits.values.ndim == 2 and targets.shape == (logits.shape[0],),
        "cross_entropy",
        logits.shape,
        targets.shape,
    )
    keep = (
        np.ones_like(targets, dtype=bool) if ignore_id is None else targets != ignore_id
    )
    count = int(keep.sum())
    logp = log_softmax_values(logits.values)
    rows = np.arange(targets.shape[0])
    nll = np.where(keep, -logp[rows, targets], 0.0)
    out = Tensor(np.asarray(nll.sum(), dtype=logits.dtype), parents=(logits,))

    def bw(g):
        soft = np.exp(logp)
        d = soft.copy()
        d[rows, targets] -= 1.0
        d[~keep] = 0.0
        _accumulate(logits, g * d)

    out.backward_fn = bw
    return out, count


def cross_entropy(
    logits: Tensor, targets: np.ndarray, ignore_id: int | None = None
) -> Tensor:
    """Mean token cross-entropy, ignoring ``ignore_id`` targets."""
    total, count = cross_entropy_sum(logits, targets, ignore_id)
    if count == 0:
        raise ValueError("cross_entropy: no unignored targets")
    return scale(total, 1.0 / count)


def tsum(a: Tensor, axis: int | None = None) -> Tensor:
    """Sum over one axis, or everything to a scalar."""
    out = Tensor(a.values.sum(axis=axis), parents=(a,))

    def bw(g):
        if axis is None:
            _accumulate(a, np.broadcast_to(g, a.shape).copy())
        else:
            _accumulate(a, np.broadcast_to(np.expand_dims(g, axis), a.shape).copy())

    out.backward_fn = bw
    return out
