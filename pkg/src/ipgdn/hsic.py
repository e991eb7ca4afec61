"""Empirical HSIC with the inner-product kernel, and the channel independence penalty.

With ``d`` samples, ``HSIC(x, y) = tr(K R S R) / (d - 1)**2`` where
``K = x x^T``, ``S = y y^T`` and ``R = I - 11^T/d`` centers the Gram
matrices. For this kernel the trace collapses to ``(x~ . y~)**2`` with
``x~``, ``y~`` the mean-centered vectors, which is what the differentiable
penalty uses.
"""

import numpy as np

from . import tensor as tn
from .errors import ShapeError, ValidationError
from .tensor import Tensor


def centering_matrix(d):
    return np.eye(d) - np.full((d, d), 1.0 / d)


def gram_inner(e):
    e = np.asarray(e.data if isinstance(e, Tensor) else e, dtype=np.float64).reshape(-1)
    return Tensor(np.outer(e, e))


def hsic_inner(e_i, e_j):
    """HSIC estimate between two equal-length sample vectors via the trace formula."""
    x = np.asarray(e_i.data if isinstance(e_i, Tensor) else e_i, dtype=np.float64).reshape(-1)
    y = np.asarray(e_j.data if isinstance(e_j, Tensor) else e_j, dtype=np.float64).reshape(-1)
    if x.shape != y.shape:
        raise ValidationError(f"hsic_inner: lengths differ ({x.size} vs {y.size})")
    d = x.size
    if d < 2:
        raise ValidationError(f"hsic_inner needs at least 2 samples, got {d}")
    # Gram entries scale with the uncentered magnitudes and cancel down to
    # a tiny trace when x and y are nearly uncorrelated; extended precision
    # (where the platform has it) keeps that cancellation harmless.
    ext = np.longdouble
    R = np.eye(d, dtype=ext) - np.full((d, d), ext(1) / d, dtype=ext)
    K = np.outer(x.astype(ext), x.astype(ext))
    S = np.outer(y.astype(ext), y.astype(ext))
    return float(np.trace(K @ R @ S @ R) / (d - 1) ** 2)


def independence_loss(H, channels, nodes=None):
    """Sum over ``nodes`` of HSIC between every ordered pair of distinct channel blocks.

    ``nodes=None`` uses every row. Returns a 1x1 tensor on the tape.
    """
    if H.cols % channels:
        raise ShapeError(f"{channels} channels do not divide representation width {H.cols}")
    d = H.cols // channels
    if channels == 1:
        return Tensor(np.zeros((1, 1)))
    if d < 2:
        raise ShapeError(f"channel width {d} leaves too few samples for HSIC")
    if nodes is not None:
        nodes = np.asarray(nodes, dtype=np.int64)
        if nodes.size == 0:
            return Tensor(np.zeros((1, 1)))
        H = tn.gather_rows(H, nodes)
    centered = tn.block_center(H, channels)
    blocks = [tn.col_slice(centered, m * d, (m + 1) * d) for m in range(channels)]
    total = None
    for i in range(channels):
        for j in range(i + 1, channels):
            c = tn.sum_cols(tn.mul(blocks[i], blocks[j]))
            term = tn.sum(tn.mul(c, c))
            total = term if total is None else tn.add(total, term)
    # ordered pairs: each unordered pair counted twice
    return tn.mul(total, 2.0 / (d - 1) ** 2)
