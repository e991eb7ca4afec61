"""Classification and clustering metrics, k-means and a PCA projection."""

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ValidationError


def _masked(pred, truth, mask):
    pred = np.asarray(pred, dtype=np.int64).reshape(-1)
    truth = np.asarray(truth, dtype=np.int64).reshape(-1)
    mask = np.arange(truth.size) if mask is None else np.asarray(mask, dtype=np.int64)
    if mask.size == 0:
        raise ValidationError("metric over an empty node set")
    t = truth[mask]
    if np.any(t < 0):
        raise ValidationError("metric mask contains unlabeled nodes")
    return pred[mask], t


def accuracy(pred, truth, mask=None):
    p, t = _masked(pred, truth, mask)
    return float(np.mean(p == t))


def macro_f1(pred, truth, mask=None, num_classes=None):
    """Unweighted mean of per-class F1; a class with no true or predicted members scores 0."""
    p, t = _masked(pred, truth, mask)
    if num_classes is None:
        num_classes = int(max(p.max(), t.max())) + 1
    scores = []
    for c in range(num_classes):
        tp = np.sum((p == c) & (t == c))
        fp = np.sum((p == c) & (t != c))
        fn = np.sum((p != c) & (t == c))
        denom = 2 * tp + fp + fn
        scores.append(2 * tp / denom if denom else 0.0)
    return float(np.mean(scores))


@dataclass
class ClusteringResult:
    assignments: np.ndarray
    centroids: np.ndarray
    inertia: float
    inertia_trace: list = field(default_factory=list)


def _plus_plus_init(x, k, rng):
    n = x.shape[0]
    centers = [x[rng.integers(n)]]
    d2 = ((x - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = rng.integers(n)
        else:
            idx = min(int(np.searchsorted(np.cumsum(d2), rng.random() * total, side="right")), n - 1)
        centers.append(x[idx])
        d2 = np.minimum(d2, ((x - x[idx]) ** 2).sum(axis=1))
    return np.array(centers)


def _sq_dists(x, centers):
    d = (x * x).sum(axis=1)[:, None] - 2 * x @ centers.T + (centers * centers).sum(axis=1)[None, :]
    return np.maximum(d, 0.0)


def _lloyd(x, centers, max_iter, tol):
    k = centers.shape[0]
    trace = []
    assign = None
    for _ in range(max_iter):
        dist = _sq_dists(x, centers)
        new_assign = dist.argmin(axis=1)
        point_d = dist[np.arange(x.shape[0]), new_assign]
        trace.append(float(point_d.sum()))
        if assign is not None and np.array_equal(new_assign, assign):
            break
        assign = new_assign
        new_centers = centers.copy()
        taken = set()
        for c in range(k):
            members = assign == c
            if members.any():
                new_centers[c] = x[members].mean(axis=0)
            else:
                # reseed from the point farthest from its current centroid
                order = np.argsort(-point_d, kind="stable")
                far = next(int(i) for i in order if int(i) not in taken)
                taken.add(far)
                new_centers[c] = x[far]
                assign[far] = c
                point_d[far] = 0.0
        shift = np.abs(new_centers - centers).max()
        centers = new_centers
        if shift <= tol:
            dist = _sq_dists(x, centers)
            assign = dist.argmin(axis=1)
            trace.append(float(dist[np.arange(x.shape[0]), assign].sum()))
            break
    inertia = float(((x - centers[assign]) ** 2).sum())
    return assign, centers, inertia, trace


def kmeans(embeddings, k, seed=0, restarts=20, max_iter=300, tol=1e-10, return_all=False):
    """Lloyd's algorithm from k-means++ seeds; keeps the restart with lowest inertia.

    With ``return_all=True`` returns ``(best, runs)`` where ``runs`` lists
    every restart's result.
    """
    x = np.asarray(getattr(embeddings, "data", embeddings), dtype=np.float64)
    n = x.shape[0]
    if not 1 <= k <= n:
        raise ValidationError(f"k={k} must lie in [1, n={n}]")
    if restarts < 1:
        raise ValidationError(f"restarts must be >= 1, got {restarts}")
    rng = np.random.default_rng(seed)
    runs = []
    for _ in range(restarts):
        centers = _plus_plus_init(x, k, rng)
        assign, centers, inertia, trace = _lloyd(x, centers, max_iter, tol)
        runs.append(ClusteringResult(assign, centers, inertia, trace))
    best = min(runs, key=lambda r: r.inertia)
    return (best, runs) if return_all else best


def contingency(a, b):
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)
    return table


def _entropy(counts):
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log(p)).sum())


def _comb2(x):
    x = np.asarray(x, dtype=np.float64)
    return x * (x - 1) / 2.0


def clustering_metrics(assignments, truth):
    """Hungarian-matched accuracy, NMI (arithmetic mean), ARI, and pairwise precision/F1."""
    a = np.asarray(assignments, dtype=np.int64).reshape(-1)
    t = np.asarray(truth, dtype=np.int64).reshape(-1)
    if a.shape != t.shape:
        raise ValidationError(f"{a.size} assignments for {t.size} labels")
    if a.size == 0:
        raise ValidationError("clustering metrics need at least one node")
    if np.any(t < 0):
        raise ValidationError("truth contains unlabeled nodes")
    n = a.size
    table = contingency(a, t)
    # canonical row order so relabeling clusters cannot change any float sum
    table = table[np.lexsort(table.T[::-1])]

    rows, cols = linear_sum_assignment(-table)
    clu_acc = table[rows, cols].sum() / n

    h_a = _entropy(table.sum(axis=1))
    h_t = _entropy(table.sum(axis=0))
    nz = table > 0
    outer = np.outer(table.sum(axis=1), table.sum(axis=0))
    mi = float((table[nz] / n * np.log(n * table[nz] / outer[nz])).sum())
    if h_a == 0.0 and h_t == 0.0:
        nmi = 1.0
    elif h_a == 0.0 or h_t == 0.0:
        nmi = 0.0
    else:
        nmi = min(max(mi / ((h_a + h_t) / 2.0), 0.0), 1.0)

    same_both = _comb2(table).sum()
    same_cluster = _comb2(table.sum(axis=1)).sum()
    same_class = _comb2(table.sum(axis=0)).sum()
    total_pairs = _comb2(n)
    expected = same_cluster * same_class / total_pairs if total_pairs else 0.0
    max_index = (same_cluster + same_class) / 2.0
    if max_index == expected:
        ari = 1.0
    else:
        ari = (same_both - expected) / (max_index - expected)

    precision = same_both / same_cluster if same_cluster else 0.0
    recall = same_both / same_class if same_class else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return {
        "clu_acc": float(clu_acc),
        "nmi": float(nmi),
        "ari": float(ari),
        "precision": float(precision),
        "f1": float(f1),
    }


def pca_2d(embeddings):
    """Project mean-centered rows onto the top two principal directions.

    Each direction's sign is fixed so its largest-magnitude component is positive.
    """
    x = np.asarray(getattr(embeddings, "data", embeddings), dtype=np.float64)
    if x.shape[0] < 2:
        raise ValidationError("PCA needs at least two rows")
    xc = x - x.mean(axis=0)
    _, _, vt = np.linalg.svd(xc, full_matrices=False)
    dirs = np.zeros((x.shape[1], 2))
    k = min(2, vt.shape[0])
    dirs[:, :k] = vt[:k].T
    for j in range(k):
        if dirs[np.argmax(np.abs(dirs[:, j])), j] < 0:
            dirs[:, j] = -dirs[:, j]
    return xc @ dirs
