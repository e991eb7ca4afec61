import json
import subprocess
import sys
from xml.etree import ElementTree

import jsonschema
import numpy as np
import pytest

from ipgdn.cli import load_schema, main
from ipgdn.evaluation import pca_2d
from ipgdn.graphio import save_graph, synth_factor_graph

FAST = {"M": 2, "delta_f": 4, "T": 2, "L": 1, "epochs": 40, "patience": 40, "dropout": 0.2, "lr": 0.02}


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    graph, _ = synth_factor_graph(120, 2, 3, 0.15, 0.01, seed=11, noise=0.5, train_per_class=8)
    path = tmp_path_factory.mktemp("data")
    save_graph(graph, path)
    return path, graph


@pytest.fixture(scope="module")
def config(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "config.json"
    path.write_text(json.dumps(FAST))
    return path


@pytest.fixture(scope="module")
def trained(dataset, config, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    assert main(["train", "--data-dir", str(dataset[0]), "--config", str(config), "--out", str(out)]) == 0
    return out


def run_json(capsys, argv):
    code = main(argv)
    captured = capsys.readouterr()
    return code, (json.loads(captured.out) if code == 0 else None), captured.err


def test_train_outputs(trained):
    assert (trained / "checkpoint.ckpt").is_file()
    trace = json.loads((trained / "trace.json").read_text())
    jsonschema.validate(trace, load_schema("trace"))
    assert trace["trace"]["epochs"] <= FAST["epochs"]
    manifest = json.loads((trained / "manifest.json").read_text())
    jsonschema.validate(manifest, load_schema("manifest"))
    assert set(manifest["wall_clock_seconds"]) >= {"load", "train"}
    assert trace["manifest"]["config"]["M"] == 2


def test_train_rerun_byte_identical(dataset, config, trained, tmp_path):
    assert main(["train", "--data-dir", str(dataset[0]), "--config", str(config), "--out", str(tmp_path)]) == 0
    assert (tmp_path / "trace.json").read_bytes() == (trained / "trace.json").read_bytes()
    assert (tmp_path / "checkpoint.ckpt").read_bytes() == (trained / "checkpoint.ckpt").read_bytes()


def test_train_missing_edges(tmp_path, dataset, config, capsys):
    src = dataset[0]
    for name in ("features.tsv", "labels.tsv", "splits.json"):
        (tmp_path / name).write_bytes((src / name).read_bytes())
    code = main(["train", "--data-dir", str(tmp_path), "--config", str(config), "--out", str(tmp_path / "o")])
    assert code == 2 and "edges.tsv" in capsys.readouterr().err


def test_train_unknown_config_key(tmp_path, dataset, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"lamda": 1e-6}))
    code = main(["train", "--data-dir", str(dataset[0]), "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert code == 2 and "lamda" in capsys.readouterr().err


def test_config_schema_matches_loader(config):
    jsonschema.validate(json.loads(config.read_text()), load_schema("config"))
    from ipgdn.model import ModelConfig
    jsonschema.validate(ModelConfig().to_dict(), load_schema("config"))


def test_train_multiple_seeds(dataset, config, tmp_path, capsys):
    code, summary, _ = run_json(capsys, ["train", "--data-dir", str(dataset[0]), "--config", str(config),
                                         "--out", str(tmp_path), "--seeds", "2", "--seed", "5"])
    assert code == 0 and summary["seeds"] == [5, 6]
    assert set(summary["mean"]) == set(summary["std"])
    assert (tmp_path / "seed-5" / "trace.json").is_file() and (tmp_path / "summary.json").is_file()


def test_eval_schema(dataset, trained, capsys):
    code, metrics, _ = run_json(capsys, ["eval", "--data-dir", str(dataset[0]), "--checkpoint",
                                         str(trained / "checkpoint.ckpt")])
    assert code == 0 and set(metrics) == {"acc", "macro_f1"}
    jsonschema.validate(metrics, load_schema("eval"))
    trace = json.loads((trained / "trace.json").read_text())
    assert metrics["acc"] == trace["metrics"]["test_acc"]


def test_eval_dimension_mismatch(tmp_path, trained, capsys):
    other, _ = synth_factor_graph(30, 3, 3, 0.3, 0.05, seed=0)
    save_graph(other, tmp_path)
    code = main(["eval", "--data-dir", str(tmp_path), "--checkpoint", str(trained / "checkpoint.ckpt")])
    assert code == 2 and "features" in capsys.readouterr().err


def test_eval_overfit_tiny_graph(tmp_path, capsys):
    graph, _ = synth_factor_graph(40, 1, 2, 1.0, 0.0, seed=1, noise=0.1, train_per_class=5)
    data = tmp_path / "data"
    save_graph(graph, data)
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"M": 2, "delta_f": 4, "T": 2, "epochs": 100, "patience": 100, "lr": 0.05}))
    assert main(["train", "--data-dir", str(data), "--config", str(cfg), "--out", str(tmp_path / "run")]) == 0
    capsys.readouterr()
    ckpt = str(tmp_path / "run" / "checkpoint.ckpt")
    code, metrics, _ = run_json(capsys, ["eval", "--data-dir", str(data), "--checkpoint", ckpt])
    assert metrics["acc"] == 1.0
    code, clusters, _ = run_json(capsys, ["cluster", "--data-dir", str(data), "--checkpoint", ckpt])
    assert clusters["k"] == 2
    assert clusters["best"]["nmi"] == pytest.approx(1.0, abs=1e-12)


def test_cluster_output(dataset, trained, capsys):
    argv = ["cluster", "--data-dir", str(dataset[0]), "--checkpoint", str(trained / "checkpoint.ckpt"),
            "--restarts", "4", "--seed", "3"]
    code, first, _ = run_json(capsys, argv)
    assert code == 0 and first["k"] == dataset[1].num_classes
    jsonschema.validate(first, load_schema("cluster"))
    _, second, _ = run_json(capsys, argv)
    assert first == second
    _, with_k, _ = run_json(capsys, argv + ["--k", "5"])
    assert with_k["k"] == 5


def test_embed_and_plot_consistent(dataset, trained, tmp_path, capsys):
    ckpt = str(trained / "checkpoint.ckpt")
    assert main(["embed", "--data-dir", str(dataset[0]), "--checkpoint", ckpt, "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "embeddings.tsv").read_text().splitlines()
    n = dataset[1].n
    assert len(lines) == n and all(len(line.split("\t")) == 8 for line in lines)
    emb = np.array([[float(v) for v in line.split("\t")] for line in lines])

    assert main(["plot", "--data-dir", str(dataset[0]), "--checkpoint", ckpt, "--out", str(tmp_path)]) == 0
    root = ElementTree.parse(tmp_path / "scatter.svg").getroot()
    ns = "{http://www.w3.org/2000/svg}"
    circles = root.findall(f".//{ns}circle")
    assert len(circles) == n
    assert len(root.findall(f".//{ns}g[@id='legend']/{ns}rect")) == dataset[1].num_classes
    coords = np.array([[float(c.get("cx")), float(c.get("cy"))] for c in circles])
    np.testing.assert_allclose(coords, pca_2d(emb), atol=1e-9)
    assert (tmp_path / "scatter.manifest.json").is_file()


def test_embed_unwritable(dataset, trained, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    code = main(["embed", "--data-dir", str(dataset[0]), "--checkpoint", str(trained / "checkpoint.ckpt"),
                 "--out", str(blocker / "sub")])
    assert code != 0


def test_sweep_contract(dataset, config, tmp_path, capsys):
    code, summary, _ = run_json(capsys, ["sweep", "--data-dir", str(dataset[0]), "--config", str(config),
                                         "--param", "lambda", "--values", "0,5e-6", "--out", str(tmp_path)])
    assert code == 0
    sweep = json.loads((tmp_path / "sweep.json").read_text())
    jsonschema.validate(sweep, load_schema("sweep"))
    assert [e["value"] for e in sweep["entries"]] == [0.0, 5e-6]
    for entry in sweep["entries"]:
        assert all(np.isfinite(entry[k]) for k in ("val_acc", "test_acc", "final_hsic"))


@pytest.mark.parametrize("argv", [["--param", "lambda", "--values", "0.1"],
                                  ["--param", "colour", "--values", "1,2"],
                                  ["--param", "T", "--values", "1.5,2"]])
def test_sweep_rejects(dataset, config, tmp_path, argv):
    assert main(["sweep", "--data-dir", str(dataset[0]), "--config", str(config), "--out", str(tmp_path)] + argv) == 2


def test_sweep_penalty_and_large_lambda(tmp_path, capsys):
    """Strong penalties shrink HSIC; a penalty that dominates the loss costs accuracy."""
    graph, _ = synth_factor_graph(300, 3, 3, 0.08, 0.004, seed=3, noise=1.0)
    save_graph(graph, tmp_path / "data")
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"M": 3, "delta_f": 8, "T": 3, "epochs": 120, "patience": 40}))
    code, _, _ = run_json(capsys, ["sweep", "--data-dir", str(tmp_path / "data"), "--config", str(cfg),
                                   "--param", "lambda", "--values", "5e-6,100,1e4", "--out", str(tmp_path / "o")])
    assert code == 0
    small, strong, huge = json.loads((tmp_path / "o" / "sweep.json").read_text())["entries"]
    assert strong["final_hsic"] < 0.5 * small["final_hsic"]
    assert huge["test_acc"] < small["test_acc"]


def test_module_entry_point(dataset, trained):
    proc = subprocess.run(
        [sys.executable, "-m", "ipgdn.cli", "eval", "--data-dir", str(dataset[0]),
         "--checkpoint", str(trained / "checkpoint.ckpt")],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0, proc.stderr
    assert set(json.loads(proc.stdout)) == {"acc", "macro_f1"}
