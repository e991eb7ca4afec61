"""Independent brute-force references for the clustering metrics."""

import itertools
import math
from collections import Counter
from fractions import Fraction


def set_partitions(n, max_blocks):
    """All labelings of ``n`` items as restricted growth strings with at most ``max_blocks`` blocks."""
    out = []

    def grow(prefix, used):
        if len(prefix) == n:
            out.append(tuple(prefix))
            return
        for b in range(min(used + 1, max_blocks)):
            grow(prefix + [b], max(used, b + 1))

    grow([], 0)
    return out


def pair_counts(a, t):
    same_both = same_a = same_t = diff_both = 0
    for i, j in itertools.combinations(range(len(a)), 2):
        sa, st = a[i] == a[j], t[i] == t[j]
        if sa and st:
            same_both += 1
        elif sa:
            same_a += 1
        elif st:
            same_t += 1
        else:
            diff_both += 1
    return same_both, same_a, same_t, diff_both


def brute_metrics(a, t):
    """Exact (Fraction) pairwise precision/F1/ARI and cluster accuracy; float NMI."""
    n = len(a)
    aa, b, c, d = pair_counts(a, t)
    precision = Fraction(aa, aa + b) if aa + b else Fraction(0)
    recall = Fraction(aa, aa + c) if aa + c else Fraction(0)
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else Fraction(0)
    denom = (aa + b) * (b + d) + (aa + c) * (c + d)
    ari = Fraction(2 * (aa * d - b * c), denom) if denom else Fraction(1)

    clusters, classes = sorted(set(a)), sorted(set(t))
    best = 0
    # try every injective matching of the smaller side into the larger
    if len(clusters) <= len(classes):
        for perm in itertools.permutations(classes, len(clusters)):
            m = dict(zip(clusters, perm))
            best = max(best, sum(m[x] == y for x, y in zip(a, t)))
    else:
        for perm in itertools.permutations(clusters, len(classes)):
            m = dict(zip(perm, classes))
            best = max(best, sum(m.get(x) == y for x, y in zip(a, t)))
    clu_acc = Fraction(best, n)

    ca, ct, joint = Counter(a), Counter(t), Counter(zip(a, t))
    h_a = -sum(v / n * math.log(v / n) for v in ca.values())
    h_t = -sum(v / n * math.log(v / n) for v in ct.values())
    mi = sum(v / n * math.log(n * v / (ca[x] * ct[y])) for (x, y), v in joint.items())
    if h_a == 0 and h_t == 0:
        nmi = 1.0
    elif h_a == 0 or h_t == 0:
        nmi = 0.0
    else:
        nmi = mi / ((h_a + h_t) / 2)
    return {"clu_acc": clu_acc, "nmi": nmi, "ari": ari, "precision": precision, "f1": f1}
