"""Dense 2-D float64 tensors with reverse-mode differentiation.

Every operation returns a new :class:`Tensor`. When any input requires a
gradient, the output keeps references to its inputs and a closure mapping
the output gradient to input gradients; :meth:`Tensor.backward` replays
those closures in reverse topological order.

Only leaf tensors (created by the user with ``requires_grad=True``)
accumulate into ``.grad``. Intermediate gradients live only for the
duration of a backward pass, so calling ``backward`` twice doubles the
leaf gradients.
"""

import numpy as np

from . import _kernels
from .errors import ConfigError, ShapeError

EPS = 1e-12


def _as_2d(data):
    arr = np.array(data, dtype=np.float64)
    if arr.ndim == 0:
        return arr.reshape(1, 1)
    if arr.ndim == 1:
        return arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ShapeError(f"tensors are 2-D, got array with shape {arr.shape}")
    return arr


class Tensor:
    def __init__(self, data, requires_grad=False, name=None):
        self.data = _as_2d(data)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.name = name
        self._parents = ()
        self._backward = None
        self._op = "leaf"

    @property
    def shape(self):
        return self.data.shape

    @property
    def rows(self):
        return self.data.shape[0]

    @property
    def cols(self):
        return self.data.shape[1]

    def numpy(self):
        return self.data

    def item(self):
        if self.data.shape != (1, 1):
            raise ShapeError(f"item() needs a 1x1 tensor, got {self.shape}")
        return float(self.data[0, 0])

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, op={self._op}{tag}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def backward(self):
        """Accumulate d(self)/d(leaf) into every leaf that requires a gradient."""
        if self.data.shape != (1, 1):
            raise ShapeError(f"backward() needs a scalar (1x1) loss, got shape {self.shape}")
        if not self.requires_grad:
            return
        grads = {id(self): np.ones((1, 1))}
        for node in reversed(build_tape(self)):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg


def build_tape(root):
    """Operations reachable from ``root`` in topological order (inputs first)."""
    order = []
    seen = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in seen:
                stack.append((parent, False))
    return order


def tensor(data, requires_grad=False, name=None):
    return Tensor(data, requires_grad=requires_grad, name=name)


def _wrap(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(data, parents, backward, op):
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.name = None
    out._op = op
    out.requires_grad = any(p.requires_grad for p in parents)
    if out.requires_grad:
        out._parents = tuple(parents)
        out._backward = backward
    else:
        out._parents = ()
        out._backward = None
    return out


def _broadcast_shape(a, b, op):
    try:
        shape = np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from None
    return shape


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    if shape[0] == 1 and g.shape[0] != 1:
        g = g.sum(axis=0, keepdims=True)
    if shape[1] == 1 and g.shape[1] != 1:
        g = g.sum(axis=1, keepdims=True)
    return g


# -- arithmetic ---------------------------------------------------------------


def add(a, b):
    a, b = _wrap(a), _wrap(b)
    _broadcast_shape(a, b, "add")

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _result(a.data + b.data, (a, b), backward, "add")


def sub(a, b):
    a, b = _wrap(a), _wrap(b)
    _broadcast_shape(a, b, "sub")

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _result(a.data - b.data, (a, b), backward, "sub")


def mul(a, b):
    """Elementwise product; row/column vectors and scalars broadcast."""
    a, b = _wrap(a), _wrap(b)
    _broadcast_shape(a, b, "mul")

    def backward(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _result(a.data * b.data, (a, b), backward, "mul")


def matmul(a, b):
    a, b = _wrap(a), _wrap(b)
    if a.cols != b.rows:
        raise ShapeError(f"matmul: inner dimensions disagree for {a.shape} @ {b.shape}")

    def backward(g):
        return g @ b.data.T, a.data.T @ g

    return _result(a.data @ b.data, (a, b), backward, "matmul")


def sum(x):  # noqa: A001 - mirrors numpy naming
    x = _wrap(x)

    def backward(g):
        return (np.full(x.shape, g[0, 0]),)

    return _result(np.array([[x.data.sum()]]), (x,), backward, "sum")


def sum_cols(x):
    """Row-wise sum, (r, c) -> (r, 1)."""
    x = _wrap(x)

    def backward(g):
        return (np.broadcast_to(g, x.shape).copy(),)

    return _result(x.data.sum(axis=1, keepdims=True), (x,), backward, "sum_cols")


# -- nonlinearities -----------------------------------------------------------


def relu(x):
    x = _wrap(x)
    mask = x.data > 0

    def backward(g):
        return (g * mask,)

    return _result(np.where(mask, x.data, 0.0), (x,), backward, "relu")


def row_softmax(x):
    x = _wrap(x)
    y = _kernels.softmax_rows(x.data)

    def backward(g):
        return (_kernels.softmax_rows_backward(y, g),)

    return _result(y, (x,), backward, "row_softmax")


def log_softmax(x):
    x = _wrap(x)
    z = x.data - x.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1, keepdims=True))
    y = z - lse

    def backward(g):
        return (g - np.exp(y) * g.sum(axis=1, keepdims=True),)

    return _result(y, (x,), backward, "log_softmax")


def row_l2_normalize(x, eps=EPS, blocks=1):
    """Divide each row (or each of ``blocks`` equal column blocks) by max(norm, eps)."""
    if eps <= 0:
        raise ConfigError(f"eps must be positive, got {eps}")
    x = _wrap(x)
    if blocks < 1 or x.cols % blocks:
        raise ShapeError(f"row_l2_normalize: {blocks} blocks do not divide width {x.cols}")
    r, c = x.shape
    d = c // blocks
    xb = x.data.reshape(r, blocks, d)
    norm = np.sqrt((xb * xb).sum(axis=2, keepdims=True))
    denom = np.maximum(norm, eps)
    yb = xb / denom
    floored = norm <= eps

    def backward(g):
        gb = g.reshape(r, blocks, d)
        proj = np.where(floored, 0.0, (gb * yb).sum(axis=2, keepdims=True))
        return (((gb - yb * proj) / denom).reshape(r, c),)

    return _result(yb.reshape(r, c), (x,), backward, "row_l2_normalize")


def dropout(x, rate, training, rng):
    """Inverted dropout; identity when not training or ``rate == 0``."""
    if not 0.0 <= rate < 1.0:
        raise ConfigError(f"dropout rate must lie in [0, 1), got {rate}")
    x = _wrap(x)
    if not training or rate == 0.0:
        return x
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)

    def backward(g):
        return (g * keep,)

    return _result(x.data * keep, (x,), backward, "dropout")


# -- indexing -----------------------------------------------------------------


def gather_rows(x, idx):
    x = _wrap(x)
    idx = np.asarray(idx, dtype=np.int64)
    n = x.rows

    def backward(g):
        return (_kernels.segment_sum(g, idx, n),)

    return _result(x.data[idx], (x,), backward, "gather_rows")


def segment_sum(x, idx, n):
    """Scatter-add: row ``e`` of ``x`` is added into output row ``idx[e]``."""
    x = _wrap(x)
    idx = np.asarray(idx, dtype=np.int64)
    if idx.shape != (x.rows,):
        raise ShapeError(f"segment_sum: index length {idx.shape} does not match rows {x.shape}")

    def backward(g):
        return (g[idx],)

    return _result(_kernels.segment_sum(x.data, idx, n), (x,), backward, "segment_sum")


def pick(x, rows, cols):
    """Entries ``x[rows[k], cols[k]]`` as a (k, 1) column."""
    x = _wrap(x)
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)

    def backward(g):
        out = np.zeros(x.shape)
        np.add.at(out, (rows, cols), g[:, 0])
        return (out,)

    return _result(x.data[rows, cols].reshape(-1, 1), (x,), backward, "pick")


def col_slice(x, start, stop):
    x = _wrap(x)
    if not 0 <= start < stop <= x.cols:
        raise ShapeError(f"col_slice: [{start}, {stop}) out of range for {x.shape}")

    def backward(g):
        out = np.zeros(x.shape)
        out[:, start:stop] = g
        return (out,)

    return _result(x.data[:, start:stop].copy(), (x,), backward, "col_slice")


# -- channel-block operations -------------------------------------------------


def _check_blocks(name, x, blocks):
    if blocks < 1 or x.cols % blocks:
        raise ShapeError(f"{name}: {blocks} blocks do not divide width of {x.shape}")


def block_dot(a, b, blocks):
    """(E, blocks*d), (E, blocks*d) -> (E, blocks) per-block dot products."""
    a, b = _wrap(a), _wrap(b)
    if a.shape != b.shape:
        raise ShapeError(f"block_dot: shapes differ {a.shape} vs {b.shape}")
    _check_blocks("block_dot", a, blocks)

    def backward(g):
        return _kernels.block_scale(b.data, g, blocks), _kernels.block_scale(a.data, g, blocks)

    return _result(_kernels.block_dot(a.data, b.data, blocks), (a, b), backward, "block_dot")


def block_scale(x, p, blocks):
    """Multiply block ``m`` of row ``e`` in ``x`` by ``p[e, m]``."""
    x, p = _wrap(x), _wrap(p)
    _check_blocks("block_scale", x, blocks)
    if p.shape != (x.rows, blocks):
        raise ShapeError(f"block_scale: weights {p.shape} do not match {x.shape} with {blocks} blocks")

    def backward(g):
        return _kernels.block_scale(g, p.data, blocks), _kernels.block_dot(g, x.data, blocks)

    return _result(_kernels.block_scale(x.data, p.data, blocks), (x, p), backward, "block_scale")


def block_center(x, blocks):
    """Subtract from each block its own mean."""
    x = _wrap(x)
    _check_blocks("block_center", x, blocks)
    r, c = x.shape
    d = c // blocks

    def center(arr):
        ab = arr.reshape(r, blocks, d)
        return (ab - ab.mean(axis=2, keepdims=True)).reshape(r, c)

    def backward(g):
        return (center(g),)

    return _result(center(x.data), (x,), backward, "block_center")


# -- gradient checking --------------------------------------------------------


def numerical_grad(fn, x, step=1e-5):
    """Central finite-difference gradient of scalar ``fn(x)`` w.r.t. array ``x``.

    ``fn`` takes a float64 array of ``x``'s shape and returns a float.
    """
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        hi = fn(x)
        flat[i] = orig - step
        lo = fn(x)
        flat[i] = orig
        gflat[i] = (hi - lo) / (2.0 * step)
    return grad


def relative_error(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    scale = max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)
    return float(np.linalg.norm(a - b) / scale)
