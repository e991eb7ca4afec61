"""GCN propagation, per-channel projection and neighborhood routing."""

import math
from dataclasses import dataclass

import numpy as np

from . import tensor as tn
from .errors import ShapeError
from .tensor import Tensor


def glorot(rng, fan_in, fan_out, shape):
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


@dataclass
class DisentangleLayerParams:
    """Weights of all ``channels`` projections stored side by side.

    Channel ``m`` uses columns ``[m*d, (m+1)*d)`` of ``weight`` and ``bias``.
    """

    weight: Tensor  # (f_in, channels * d)
    bias: Tensor  # (1, channels * d)
    channels: int

    def __post_init__(self):
        if self.weight.cols % self.channels:
            raise ShapeError(
                f"{self.channels} channels do not divide layer width {self.weight.cols}"
            )
        if self.bias.shape != (1, self.weight.cols):
            raise ShapeError(f"bias shape {self.bias.shape} does not match weight {self.weight.shape}")

    @classmethod
    def init(cls, in_features, channels, channel_width, rng):
        w = glorot(rng, in_features, channel_width, (in_features, channels * channel_width))
        return cls(
            Tensor(w, requires_grad=True, name="weight"),
            Tensor(np.zeros((1, channels * channel_width)), requires_grad=True, name="bias"),
            channels,
        )

    @property
    def channel_width(self):
        return self.weight.cols // self.channels

    @property
    def out_features(self):
        return self.weight.cols

    def channel(self, m):
        """``(W_m, b_m)`` as numpy views for channel ``m``."""
        d = self.channel_width
        return self.weight.data[:, m * d:(m + 1) * d], self.bias.data[0, m * d:(m + 1) * d]


def gcn_layer(H, adj, W, activation=True):
    """One propagation step ``act(adj @ H @ W)``."""
    out = tn.matmul(adj, tn.matmul(H, W))
    return tn.relu(out) if activation else out


def project(H, params):
    """Project every row of ``H`` into all channels, ReLU, then unit-normalize each channel."""
    if H.cols != params.weight.rows:
        raise ShapeError(f"layer input {H.shape} does not match weight {params.weight.shape}")
    z = tn.relu(tn.add(tn.matmul(H, params.weight), params.bias))
    return tn.row_l2_normalize(z, blocks=params.channels)


def channel_project(x_o, params, m):
    """Unit-normalized projection of one feature row into channel ``m``."""
    if not 0 <= m < params.channels:
        raise ShapeError(f"channel {m} out of range for {params.channels} channels")
    d = params.channel_width
    w = tn.col_slice(params.weight, m * d, (m + 1) * d)
    b = tn.col_slice(params.bias, m * d, (m + 1) * d)
    return tn.row_l2_normalize(tn.relu(tn.add(tn.matmul(x_o, w), b)))


def route(Z, src, dst, channels, iterations, record=None):
    """Neighborhood routing for every node at once.

    ``Z`` holds the normalized channel projections of all nodes; node
    ``src[k]`` has neighbor ``dst[k]``. Anchors start at each node's own
    projection. Each iteration computes, per edge, a softmax over channels
    of the similarity between the neighbor's projection and the current
    anchor, then rebuilds each anchor as the normalized sum of the node's
    own projection and its neighbors' projections weighted by those
    probabilities.

    ``record``, when a list, receives one ``{"p": ..., "e": ...}`` dict of
    numpy arrays per iteration.
    """
    if iterations < 1:
        raise ValueError(f"routing needs at least one iteration, got {iterations}")
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    n = Z.rows
    e = Z
    if src.size == 0:
        if record is not None:
            for _ in range(iterations):
                record.append({"p": np.zeros((0, channels)), "e": Z.data.copy()})
        return Z
    z_nbr = tn.gather_rows(Z, dst)
    for _ in range(iterations):
        sim = tn.block_dot(z_nbr, tn.gather_rows(e, src), channels)
        p = tn.row_softmax(sim)
        pooled = tn.segment_sum(tn.block_scale(z_nbr, p, channels), src, n)
        e = tn.row_l2_normalize(tn.add(Z, pooled), blocks=channels)
        if record is not None:
            record.append({"p": p.data.copy(), "e": e.data.copy()})
    return e


def neighborhood_routing(z_u, z_neighbors, iterations, record=None):
    """Route a single node.

    ``z_u`` is an (M, d) array of channel vectors and ``z_neighbors`` a
    (k, M, d) array. Returns the (M, d) array of final anchors. Neighbors
    are put in a canonical order first so the result does not depend on
    the order they are listed in.
    """
    z_u = np.asarray(z_u, dtype=np.float64)
    channels, d = z_u.shape
    z_nb = np.asarray(z_neighbors, dtype=np.float64).reshape(-1, channels, d)
    flat = z_nb.reshape(z_nb.shape[0], channels * d)
    if flat.shape[0] > 1:
        flat = flat[np.lexsort(flat.T[::-1])]
    k = flat.shape[0]
    Z = Tensor(np.vstack([z_u.reshape(1, -1), flat]))
    src = np.zeros(k, dtype=np.int64)
    dst = np.arange(1, k + 1, dtype=np.int64)
    e = route(Z, src, dst, channels, iterations, record=record)
    if record is not None:
        for entry in record:
            entry["e"] = entry["e"][0].reshape(channels, d)
    return e.data[0].reshape(channels, d).copy()


def disentangle(H, graph, params, iterations, record=None):
    """Projection plus routing for all nodes; output is the concatenation of anchors."""
    src, dst = graph.directed_edges()
    return route(project(H, params), src, dst, params.channels, iterations, record=record)


def disentangle_layer(H, graph, params, iterations, dropout_rate, training, rng=None):
    return tn.dropout(disentangle(H, graph, params, iterations), dropout_rate, training, rng)
