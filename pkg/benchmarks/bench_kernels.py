"""Compare the compiled and numpy kernel backends.

Times each edge-level kernel on both backends, then a full training epoch
in a subprocess per backend (the backend is fixed at import time).

    python benchmarks/bench_kernels.py [--edges 200000] [--nodes 2000]
"""

import argparse
import json
import os
import subprocess
import sys
import timeit

import numpy as np

from ipgdn import _pykernels

try:
    from ipgdn import _ckernels
except ImportError:
    _ckernels = None

EPOCH_SNIPPET = """
import json, time, numpy as np
from ipgdn._kernels import BACKEND
from ipgdn.graphio import make_graph
from ipgdn.model import ModelConfig, train
n = {nodes}
rng = np.random.default_rng(0)
perm = rng.permutation(n)
graph = make_graph(rng.standard_normal((n, 64)), rng.integers(0, n, size=(5 * n, 2)),
                   rng.integers(0, 4, size=n), {{"train": perm[:100].tolist(), "val": perm[100:300].tolist(),
                   "test": perm[300:].tolist()}}, num_classes=4)
stamps = []
t0 = time.perf_counter()
train(graph, ModelConfig(epochs=8, patience=8), on_epoch=lambda e, t: stamps.append(time.perf_counter()))
print(json.dumps({{"backend": BACKEND, "epoch_ms": 1e3 * float(np.median(np.diff([t0] + stamps)[2:]))}}))
"""


def kernel_cases(edges, nodes, channels=4, width=16, seed=0):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((edges, channels * width))
    b = rng.standard_normal((edges, channels * width))
    p = rng.random((edges, channels))
    idx = np.sort(rng.integers(0, nodes, size=edges))
    y = _pykernels.softmax_rows(p)
    return {
        "segment_sum": lambda k: k.segment_sum(a, idx, nodes),
        "block_dot": lambda k: k.block_dot(a, b, channels),
        "block_scale": lambda k: k.block_scale(a, p, channels),
        "softmax_rows": lambda k: k.softmax_rows(p),
        "softmax_rows_backward": lambda k: k.softmax_rows_backward(y, p),
    }


def best_ms(fn, repeat=7):
    return 1e3 * min(timeit.repeat(fn, number=1, repeat=repeat))


def epoch_ms(nodes, pure):
    env = dict(os.environ)
    env.pop("IPGDN_PURE_PYTHON", None)
    if pure:
        env["IPGDN_PURE_PYTHON"] = "1"
    out = subprocess.run([sys.executable, "-c", EPOCH_SNIPPET.format(nodes=nodes)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(out.stdout)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--edges", type=int, default=200_000)
    parser.add_argument("--nodes", type=int, default=2000)
    args = parser.parse_args()

    print(f"{'kernel':24s} {'python ms':>10s} {'cython ms':>10s} {'speedup':>8s}")
    for name, call in kernel_cases(args.edges, args.nodes).items():
        py = best_ms(lambda: call(_pykernels))
        if _ckernels is None:
            print(f"{name:24s} {py:10.2f} {'n/a':>10s}")
            continue
        cy = best_ms(lambda: call(_ckernels))
        print(f"{name:24s} {py:10.2f} {cy:10.2f} {py / cy:7.2f}x")

    print()
    for pure in (True, False):
        result = epoch_ms(args.nodes, pure)
        print(f"full epoch, n={args.nodes}, {result['backend']:6s} backend: {result['epoch_ms']:.1f} ms")


if __name__ == "__main__":
    main()
