"""Pick dropout and learning rate for the synthetic factor-graph experiment.

Selection uses validation accuracy on a graph seed (100) that the
acceptance run never evaluates, separately for each model kind.
"""

import itertools
import json

from ipgdn.graphio import synth_factor_graph
from ipgdn.model import ModelConfig, evaluate, train

SEED = 100
BASE = dict(M=3, delta_f=8, T=4, L=1, lam=5e-6, epochs=1000, patience=100)


def main():
    graph, _ = synth_factor_graph(600, 3, 4, 0.05, 0.002, seed=SEED, noise=1.0)
    chosen = {}
    for kind in ("ipgdn", "gcn-baseline"):
        scores = {}
        for dropout, lr in itertools.product((0.05, 0.2, 0.35, 0.5), (0.003, 0.01, 0.03)):
            cfg = ModelConfig(seed=SEED, model_kind=kind, dropout=dropout, lr=lr, **BASE)
            model, _ = train(graph, cfg)
            scores[(dropout, lr)] = evaluate(model, graph, cfg)["val_acc"]
            print(kind, dropout, lr, round(scores[(dropout, lr)], 4), flush=True)
        best = max(scores, key=scores.get)
        chosen[kind] = {"dropout": best[0], "lr": best[1], "val_acc": scores[best]}
    print(json.dumps(chosen, indent=2))


if __name__ == "__main__":
    main()
