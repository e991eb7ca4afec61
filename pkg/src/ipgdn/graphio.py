"""Graph datasets in a plain-text directory format.

A dataset directory holds four files:

``features.tsv``
    One line per node, tab-separated floats; line index is the node id.
``edges.tsv``
    One ``u<TAB>v`` pair per line, 0-based ids. Direction and duplicates
    are ignored.
``labels.tsv``
    One integer per line, ``-1`` for unlabeled nodes.
``splits.json``
    ``{"train": [...], "val": [...], "test": [...]}``.
"""

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, ValidationError

FILES = ("features.tsv", "edges.tsv", "labels.tsv", "splits.json")
UNLABELED = -1


@dataclass(frozen=True, eq=False)
class Graph:
    features: np.ndarray
    edges: np.ndarray  # (|E|, 2) int64, u < v, sorted, unique
    labels: np.ndarray  # (n,) int64, UNLABELED for missing
    num_classes: int
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        for arr in (self.features, self.edges, self.labels, self.train, self.val, self.test):
            arr.setflags(write=False)

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def f(self):
        return self.features.shape[1]

    @property
    def num_edges(self):
        return self.edges.shape[0]

    def directed_edges(self):
        """Both orientations of every edge, sorted by (source, target).

        Returns ``(src, dst)``: node ``src[k]`` has neighbor ``dst[k]``.
        """
        if "directed" not in self._cache:
            u, v = self.edges[:, 0], self.edges[:, 1]
            src = np.concatenate([u, v])
            dst = np.concatenate([v, u])
            order = np.lexsort((dst, src))
            self._cache["directed"] = (src[order], dst[order])
        return self._cache["directed"]

    def degrees(self):
        return np.bincount(self.edges.reshape(-1), minlength=self.n)

    def split(self, name):
        return {"train": self.train, "val": self.val, "test": self.test}[name]


def make_graph(features, edges, labels, splits, num_classes=None):
    """Build a validated :class:`Graph` from in-memory arrays."""
    features = np.array(features, dtype=np.float64)
    if features.ndim != 2:
        raise ValidationError(f"features must be 2-D, got shape {features.shape}")
    n = features.shape[0]
    labels = np.array(labels, dtype=np.int64).reshape(-1)
    if labels.shape[0] != n:
        raise ValidationError(f"{labels.shape[0]} labels for {n} nodes")
    if np.any(labels < UNLABELED):
        raise ValidationError("labels must be >= -1")
    edges = canonical_edges(edges, n)
    if num_classes is None:
        num_classes = int(labels.max()) + 1 if np.any(labels >= 0) else 0
    if np.any(labels >= num_classes):
        raise ValidationError(f"label {labels.max()} outside [0, {num_classes})")
    parts = {}
    for name in ("train", "val", "test"):
        ids = np.array(splits.get(name, []), dtype=np.int64).reshape(-1)
        if ids.size and (ids.min() < 0 or ids.max() >= n):
            raise ValidationError(f"split {name!r} references a node outside [0, {n})")
        if np.unique(ids).size != ids.size:
            raise ValidationError(f"split {name!r} lists a node twice")
        parts[name] = ids
    for a, b in (("train", "val"), ("train", "test"), ("val", "test")):
        common = np.intersect1d(parts[a], parts[b])
        if common.size:
            raise ValidationError(f"splits {a!r} and {b!r} overlap (e.g. node {common[0]})")
    return Graph(features, edges, labels, int(num_classes), parts["train"], parts["val"], parts["test"])


def canonical_edges(edges, n):
    edges = np.array(edges, dtype=np.int64).reshape(-1, 2)
    if edges.size and (edges.min() < 0 or edges.max() >= n):
        raise ValidationError(f"edge references a node outside [0, {n})")
    edges = np.sort(edges, axis=1)
    edges = edges[edges[:, 0] != edges[:, 1]]
    if edges.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    return np.unique(edges, axis=0)


def _read_lines(path):
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise FileNotFoundError(f"missing dataset file: {path}") from None
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return lines


def load_graph(data_dir):
    data_dir = Path(data_dir)
    for name in FILES:
        if not (data_dir / name).is_file():
            raise FileNotFoundError(f"missing dataset file: {data_dir / name}")

    rows = []
    for lineno, line in enumerate(_read_lines(data_dir / "features.tsv"), 1):
        try:
            rows.append([float(tok) for tok in line.split("\t")])
        except ValueError:
            raise ValidationError(f"features.tsv line {lineno}: malformed float") from None
        if len(rows[-1]) != len(rows[0]):
            raise ValidationError(
                f"features.tsv line {lineno}: {len(rows[-1])} columns, expected {len(rows[0])}"
            )
    n = len(rows)
    features = np.array(rows, dtype=np.float64).reshape(n, len(rows[0]) if rows else 0)

    labels = []
    for lineno, line in enumerate(_read_lines(data_dir / "labels.tsv"), 1):
        try:
            labels.append(int(line))
        except ValueError:
            raise ValidationError(f"labels.tsv line {lineno}: malformed integer {line!r}") from None
    if len(labels) != n:
        raise ValidationError(f"labels.tsv has {len(labels)} lines for {n} nodes")

    pairs = []
    for lineno, line in enumerate(_read_lines(data_dir / "edges.tsv"), 1):
        toks = line.split("\t")
        if len(toks) != 2:
            raise ValidationError(f"edges.tsv line {lineno}: expected 'u<TAB>v', got {line!r}")
        try:
            u, v = int(toks[0]), int(toks[1])
        except ValueError:
            raise ValidationError(f"edges.tsv line {lineno}: malformed node id") from None
        if not (0 <= u < n and 0 <= v < n):
            raise ValidationError(f"edges.tsv line {lineno}: unknown node id in {line!r} (n={n})")
        pairs.append((u, v))

    try:
        splits = json.loads((data_dir / "splits.json").read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"splits.json: {exc}") from None
    if not isinstance(splits, dict) or set(splits) - {"train", "val", "test"}:
        raise ValidationError("splits.json must be an object with keys train/val/test")
    for name, ids in splits.items():
        if not isinstance(ids, list) or not all(isinstance(i, int) for i in ids):
            raise ValidationError(f"splits.json: {name!r} must be a list of integers")
    graph = make_graph(features, pairs, labels, splits)
    for name in ("train", "val", "test"):
        ids = graph.split(name)
        if np.any(graph.labels[ids] == UNLABELED):
            raise ValidationError(f"split {name!r} contains unlabeled nodes")
    return graph


def save_graph(graph, data_dir):
    data_dir = Path(data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    with open(data_dir / "features.tsv", "w", encoding="utf-8", newline="\n") as fh:
        for row in graph.features:
            fh.write("\t".join(repr(float(x)) for x in row) + "\n")
    with open(data_dir / "edges.tsv", "w", encoding="utf-8", newline="\n") as fh:
        for u, v in graph.edges:
            fh.write(f"{u}\t{v}\n")
    with open(data_dir / "labels.tsv", "w", encoding="utf-8", newline="\n") as fh:
        for y in graph.labels:
            fh.write(f"{y}\n")
    splits = {name: [int(i) for i in graph.split(name)] for name in ("train", "val", "test")}
    (data_dir / "splits.json").write_text(json.dumps(splits) + "\n", encoding="utf-8")


def fingerprint(data_dir):
    """Sizes and a SHA-256 over the dataset files, for run manifests."""
    data_dir = Path(data_dir)
    h = hashlib.sha256()
    sizes = {}
    for name in FILES:
        blob = (data_dir / name).read_bytes()
        sizes[name] = len(blob)
        h.update(name.encode())
        h.update(len(blob).to_bytes(8, "little"))
        h.update(blob)
    return {"sizes": sizes, "sha256": h.hexdigest()}


def normalized_adjacency(graph):
    """Dense ``D^-1/2 (A + I) D^-1/2`` for the graph's undirected edges."""
    if "adj" in graph._cache:
        return graph._cache["adj"]
    n = graph.n
    a = np.eye(n)
    u, v = graph.edges[:, 0], graph.edges[:, 1]
    a[u, v] = 1.0
    a[v, u] = 1.0
    inv_sqrt = 1.0 / np.sqrt(a.sum(axis=1))
    adj = inv_sqrt[:, None] * a * inv_sqrt[None, :]
    adj = 0.5 * (adj + adj.T)
    adj.setflags(write=False)
    graph._cache["adj"] = adj
    return adj


def synth_factor_graph(n, M, per_factor_communities, p_in, p_out, seed, noise=0.1,
                       train_per_class=20, num_val=None, num_test=None):
    """Union of ``M`` independent planted-partition graphs over the same nodes.

    Factor ``m`` assigns every node to one of ``per_factor_communities``
    communities (balanced, independently permuted per factor); pairs in the
    same community connect with ``p_in``, others with ``p_out``. Features are
    the concatenated one-hot community indicators of all factors plus
    Gaussian noise with standard deviation ``noise``. Labels come from the
    first factor.

    Returns ``(graph, factors)`` where ``factors`` is an (M, n) array of
    community assignments.
    """
    for name, p in (("p_in", p_in), ("p_out", p_out)):
        if not 0.0 <= p <= 1.0 or math.isnan(p):
            raise ConfigError(f"{name} must lie in [0, 1], got {p}")
    if M < 1 or per_factor_communities < 1:
        raise ConfigError("need at least one factor and one community")
    if n % per_factor_communities:
        raise ConfigError(f"n={n} is not divisible by {per_factor_communities} communities")
    if noise < 0:
        raise ConfigError(f"noise must be >= 0, got {noise}")
    rng = np.random.default_rng(seed)
    k = per_factor_communities
    size = n // k
    factors = np.empty((M, n), dtype=np.int64)
    iu, ju = np.triu_indices(n, k=1)
    adjacency = np.zeros(iu.size, dtype=bool)
    for m in range(M):
        comm = rng.permutation(np.repeat(np.arange(k), size))
        factors[m] = comm
        same = comm[iu] == comm[ju]
        prob = np.where(same, p_in, p_out)
        adjacency |= rng.random(iu.size) < prob
    edges = np.stack([iu[adjacency], ju[adjacency]], axis=1)

    features = np.zeros((n, M * k))
    for m in range(M):
        features[np.arange(n), m * k + factors[m]] = 1.0
    features += noise * rng.standard_normal(features.shape)

    labels = factors[0].copy()
    order = rng.permutation(n)
    train = []
    for c in range(k):
        train.extend(order[labels[order] == c][:train_per_class].tolist())
    chosen = set(train)
    rest = [i for i in order.tolist() if i not in chosen]
    if num_val is None:
        num_val = (len(rest)) // 3
    if num_test is None:
        num_test = len(rest) - num_val
    splits = {
        "train": sorted(train),
        "val": sorted(rest[:num_val]),
        "test": sorted(rest[num_val:num_val + num_test]),
    }
    return make_graph(features, edges, labels, splits, num_classes=k), factors
