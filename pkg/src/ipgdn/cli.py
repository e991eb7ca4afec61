"""``ipgdn`` command-line interface.

Metrics are printed to stdout as JSON, logs go to stderr, and files are
written only under ``--out``. Exit status: 0 success, 2 validation or
configuration error, 3 runtime or training error.
"""

import argparse
import json
import logging
import sys
import time
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from ._kernels import BACKEND
from .errors import ConfigError, IpgdnError, ShapeError, TrainingError, ValidationError
from .evaluation import accuracy, clustering_metrics, kmeans, macro_f1, pca_2d
from .graphio import fingerprint, load_graph
from .model import ModelConfig, evaluate, load_checkpoint, predict, save_checkpoint, train
from .plotting import scatter_svg

log = logging.getLogger("ipgdn")

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_RUNTIME = 3

SWEEPABLE = {
    "lambda": ("lam", float),
    "dropout": ("dropout", float),
    "lr": ("lr", float),
    "weight_decay": ("weight_decay", float),
    "M": ("M", int),
    "delta_f": ("delta_f", int),
    "T": ("T", int),
    "L": ("L", int),
    "epochs": ("epochs", int),
    "patience": ("patience", int),
}


class Phases:
    """Wall-clock timing per named phase."""

    def __init__(self):
        self.seconds = {}

    def run(self, name, fn, *args, **kwargs):
        start = time.perf_counter()
        try:
            return fn(*args, **kwargs)
        finally:
            self.seconds[name] = self.seconds.get(name, 0.0) + time.perf_counter() - start


def load_schema(name):
    """JSON schema shipped with the package, e.g. ``load_schema("trace")``."""
    text = resources.files("ipgdn").joinpath("schemas", f"{name}.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def _dump(obj):
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _write(path, text):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def load_config(path):
    if path is None:
        return ModelConfig()
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise FileNotFoundError(f"missing config file: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return ModelConfig.from_dict(data)


def make_manifest(cfg, data_dir, command):
    """Deterministic part of a run manifest (no timings)."""
    return {
        "artifact_version": f"ipgdn-{__version__}",
        "kernel_backend": BACKEND,
        "command": command,
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "dataset": fingerprint(data_dir),
    }


def _seed_list(cfg, args):
    base = cfg.seed if args.seed is None else args.seed
    count = args.seeds or 1
    if count < 1:
        raise ConfigError(f"--seeds must be >= 1, got {count}")
    return [base + i for i in range(count)]


def _train_one(graph, cfg, data_dir, out, phases):
    model, trace = phases.run("train", train, graph, cfg)
    metrics = phases.run("evaluate", evaluate, model, graph, cfg)
    manifest = make_manifest(cfg, data_dir, "train")
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(out / "checkpoint.ckpt", model, cfg, manifest)
    _write(out / "trace.json", _dump({"manifest": manifest, "metrics": metrics, "trace": trace.to_dict()}))
    return metrics, manifest


def cmd_train(args):
    phases = Phases()
    graph = phases.run("load", load_graph, args.data_dir)
    cfg = load_config(args.config)
    seeds = _seed_list(cfg, args)
    out = Path(args.out)
    runs = []
    for seed in seeds:
        run_cfg = cfg.replace(seed=seed)
        run_out = out if len(seeds) == 1 else out / f"seed-{seed}"
        log.info("training seed %d -> %s", seed, run_out)
        metrics, manifest = _train_one(graph, run_cfg, args.data_dir, run_out, phases)
        runs.append(metrics)
        _write(run_out / "manifest.json", _dump({**manifest, "wall_clock_seconds": dict(phases.seconds)}))
    summary = _summarize(runs, seeds)
    if len(seeds) > 1:
        _write(out / "summary.json", _dump(summary))
    print(json.dumps(summary, sort_keys=True))


def _summarize(runs, seeds):
    if len(runs) == 1:
        return runs[0]
    keys = sorted(runs[0])
    return {
        "seeds": seeds,
        "mean": {k: float(np.mean([r[k] for r in runs])) for k in keys},
        "std": {k: float(np.std([r[k] for r in runs])) for k in keys},
    }


def _load_pair(args):
    graph = load_graph(args.data_dir)
    model, cfg, _ = load_checkpoint(args.checkpoint)
    if model.in_features != graph.f or model.num_classes != graph.num_classes:
        raise ValidationError(
            f"checkpoint expects {model.in_features} features / {model.num_classes} classes, "
            f"dataset has {graph.f} / {graph.num_classes}"
        )
    return graph, model, cfg


def cmd_eval(args):
    graph, model, cfg = _load_pair(args)
    pred, _ = predict(model, graph, cfg)
    mask = graph.test
    print(json.dumps({
        "acc": accuracy(pred, graph.labels, mask),
        "macro_f1": macro_f1(pred, graph.labels, mask, graph.num_classes),
    }, sort_keys=True))


def cmd_cluster(args):
    graph, model, cfg = _load_pair(args)
    _, hidden = predict(model, graph, cfg)
    nodes = np.flatnonzero(graph.labels >= 0)
    k = graph.num_classes if args.k is None else args.k
    best, runs = kmeans(hidden.data[nodes], k, seed=args.seed or 0, restarts=args.restarts, return_all=True)
    per_run = [clustering_metrics(r.assignments, graph.labels[nodes]) for r in runs]
    mean = {key: float(np.mean([m[key] for m in per_run])) for key in per_run[0]}
    print(json.dumps({
        "k": k,
        "restarts": args.restarts,
        "mean": mean,
        "best": clustering_metrics(best.assignments, graph.labels[nodes]),
        "best_inertia": best.inertia,
    }, sort_keys=True))


def _embedding_manifest(args, cfg, command):
    manifest = make_manifest(cfg, args.data_dir, command)
    manifest["checkpoint"] = str(args.checkpoint)
    return manifest


def cmd_embed(args):
    graph, model, cfg = _load_pair(args)
    _, hidden = predict(model, graph, cfg)
    out = Path(args.out)
    lines = ["\t".join(repr(float(v)) for v in row) for row in hidden.data]
    _write(out / "embeddings.tsv", "\n".join(lines) + "\n")
    _write(out / "embeddings.manifest.json", _dump(_embedding_manifest(args, cfg, "embed")))
    print(json.dumps({"rows": hidden.rows, "cols": hidden.cols, "path": str(out / "embeddings.tsv")}))


def cmd_plot(args):
    graph, model, cfg = _load_pair(args)
    _, hidden = predict(model, graph, cfg)
    coords = pca_2d(hidden.data)
    out = Path(args.out)
    _write(out / "scatter.svg", scatter_svg(coords, graph.labels, title=f"{cfg.model_kind} PCA"))
    _write(out / "scatter.manifest.json", _dump(_embedding_manifest(args, cfg, "plot")))
    print(json.dumps({"points": int(coords.shape[0]), "path": str(out / "scatter.svg")}))


def _parse_values(param, text):
    if param not in SWEEPABLE:
        raise ConfigError(f"cannot sweep {param!r}; choose from {', '.join(SWEEPABLE)}")
    field, kind = SWEEPABLE[param]
    values = []
    for tok in text.split(","):
        tok = tok.strip()
        try:
            v = float(tok)
        except ValueError:
            raise ConfigError(f"--values: {tok!r} is not a number") from None
        if kind is int:
            if v != int(v):
                raise ConfigError(f"--values: {param} needs integers, got {tok}")
            v = int(v)
        values.append(v)
    if len(values) < 2:
        raise ConfigError("--values needs at least two entries")
    return field, values


def cmd_sweep(args):
    phases = Phases()
    graph = phases.run("load", load_graph, args.data_dir)
    cfg = load_config(args.config)
    field, values = _parse_values(args.param, args.values)
    seeds = _seed_list(cfg, args)
    entries = []
    for value in values:
        runs = []
        for seed in seeds:
            run_cfg = cfg.replace(**{field: value, "seed": seed})
            model, trace = phases.run("train", train, graph, run_cfg)
            metrics = evaluate(model, graph, run_cfg)
            runs.append({
                "val_acc": metrics.get("val_acc", float("nan")),
                "test_acc": metrics.get("test_acc", float("nan")),
                "test_macro_f1": metrics.get("test_macro_f1", float("nan")),
                "final_hsic": metrics["hsic"],
                "epochs": len(trace),
            })
            log.info("%s=%s seed=%d test_acc=%.4f hsic=%.6g", args.param, value, seed,
                     runs[-1]["test_acc"], runs[-1]["final_hsic"])
        entry = {"value": value, "seeds": seeds}
        for key in ("val_acc", "test_acc", "test_macro_f1", "final_hsic"):
            entry[key] = float(np.mean([r[key] for r in runs]))
        entry["runs"] = runs
        entries.append(entry)
    manifest = make_manifest(cfg, args.data_dir, "sweep")
    result = {"manifest": manifest, "param": args.param, "entries": entries}
    out = Path(args.out)
    _write(out / "sweep.json", _dump(result))
    _write(out / "manifest.json", _dump({**manifest, "wall_clock_seconds": dict(phases.seconds)}))
    print(json.dumps({"param": args.param, "entries": [
        {k: e[k] for k in ("value", "val_acc", "test_acc", "final_hsic")} for e in entries
    ]}, sort_keys=True))


def build_parser():
    parser = argparse.ArgumentParser(prog="ipgdn", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"ipgdn {__version__} ({BACKEND} kernels)")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, checkpoint=False, out=True):
        p.add_argument("--data-dir", required=True, type=Path)
        if checkpoint:
            p.add_argument("--checkpoint", required=True, type=Path)
        if out:
            p.add_argument("--out", required=True, type=Path)

    p = sub.add_parser("train", help="train a model and write checkpoint + trace")
    common(p)
    p.add_argument("--config", type=Path)
    p.add_argument("--seed", type=int)
    p.add_argument("--seeds", type=int, help="train N consecutive seeds and report mean/std")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="test-set accuracy and macro-F1 of a checkpoint")
    common(p, checkpoint=True, out=False)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("cluster", help="k-means on the learned representation")
    common(p, checkpoint=True, out=False)
    p.add_argument("--k", type=int)
    p.add_argument("--restarts", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("embed", help="export the learned representation as TSV")
    common(p, checkpoint=True)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("plot", help="2-D PCA scatter plot as SVG")
    common(p, checkpoint=True)
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("sweep", help="train once per value of one config field")
    common(p)
    p.add_argument("--config", type=Path)
    p.add_argument("--param", required=True)
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--seed", type=int)
    p.add_argument("--seeds", type=int)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        args.func(args)
    except (ConfigError, ValidationError, ShapeError, FileNotFoundError) as exc:
        print(f"ipgdn {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (TrainingError, IpgdnError, OSError) as exc:
        print(f"ipgdn {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
