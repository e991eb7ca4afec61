"""Pure numpy implementations of the edge-level kernels.

These are the reference versions; ``_ckernels`` mirrors them in Cython.
"""

import numpy as np


def segment_sum(x, idx, n):
    """Scatter-add rows: ``out[idx[e]] += x[e]`` for every edge row ``e``."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    idx = np.asarray(idx, dtype=np.int64)
    out = np.zeros((n, x.shape[1]), dtype=np.float64)
    if idx.size == 0:
        return out
    if np.any(idx[1:] < idx[:-1]):
        order = np.argsort(idx, kind="stable")
        idx = idx[order]
        x = x[order]
    starts = np.flatnonzero(np.r_[True, idx[1:] != idx[:-1]])
    out[idx[starts]] = np.add.reduceat(x, starts, axis=0)
    return out


def block_dot(a, b, blocks):
    """Per-block row dot products: (E, blocks*d) x (E, blocks*d) -> (E, blocks)."""
    rows, cols = a.shape
    d = cols // blocks
    return (a * b).reshape(rows, blocks, d).sum(axis=2)


def block_scale(x, p, blocks):
    """Scale block ``m`` of row ``e`` by ``p[e, m]``."""
    rows, cols = x.shape
    d = cols // blocks
    return (x.reshape(rows, blocks, d) * p[:, :, None]).reshape(rows, cols)


def softmax_rows(x):
    z = x - x.max(axis=1, keepdims=True)
    ez = np.exp(z)
    return ez / ez.sum(axis=1, keepdims=True)


def softmax_rows_backward(y, g):
    return y * (g - (g * y).sum(axis=1, keepdims=True))
