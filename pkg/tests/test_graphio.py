import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ipgdn.errors import ConfigError, ValidationError
from ipgdn.graphio import load_graph, make_graph, normalized_adjacency, save_graph, synth_factor_graph


def write_dataset(path, features, edges_text, labels, splits):
    path.mkdir(parents=True, exist_ok=True)
    (path / "features.tsv").write_text("".join("\t".join(map(str, r)) + "\n" for r in features))
    (path / "edges.tsv").write_text(edges_text)
    (path / "labels.tsv").write_text("".join(f"{y}\n" for y in labels))
    (path / "splits.json").write_text(json.dumps(splits))
    return path


def dense_oracle(n, edges):
    a = np.eye(n)
    for u, v in edges:
        a[u, v] = a[v, u] = 1.0
    d = np.diag(1.0 / np.sqrt(a.sum(axis=1)))
    return d @ a @ d


def test_single_node(tmp_path):
    g = load_graph(write_dataset(tmp_path, [[1.0, 2.0]], "", [0], {"train": [0], "val": [], "test": []}))
    assert g.n == 1 and g.num_edges == 0
    np.testing.assert_array_equal(normalized_adjacency(g), [[1.0]])


def test_duplicate_orientations_dedup(tmp_path):
    g = load_graph(write_dataset(tmp_path, [[0.0], [1.0]], "0\t1\n1\t0\n", [0, 1],
                                 {"train": [0], "val": [1], "test": []}))
    assert g.edges.tolist() == [[0, 1]]


def test_missing_file_named(tmp_path):
    write_dataset(tmp_path, [[0.0]], "", [0], {"train": [0]})
    (tmp_path / "edges.tsv").unlink()
    with pytest.raises(FileNotFoundError, match="edges.tsv"):
        load_graph(tmp_path)


def test_unknown_node_reports_line(tmp_path):
    write_dataset(tmp_path, [[0.0], [1.0]], "0\t1\n1\t5\n", [0, 1], {"train": [0]})
    with pytest.raises(ValidationError, match="line 2"):
        load_graph(tmp_path)


def test_malformed_lines(tmp_path):
    write_dataset(tmp_path, [[0.0], [1.0]], "0 1\n", [0, 1], {"train": [0]})
    with pytest.raises(ValidationError, match="line 1"):
        load_graph(tmp_path)
    write_dataset(tmp_path, [[0.0], [1.0]], "", [0, "x"], {"train": [0]})
    with pytest.raises(ValidationError, match="labels.tsv line 2"):
        load_graph(tmp_path)


def test_overlapping_splits(tmp_path):
    write_dataset(tmp_path, [[0.0], [1.0]], "", [0, 1], {"train": [0, 1], "val": [1], "test": []})
    with pytest.raises(ValidationError, match="overlap"):
        load_graph(tmp_path)


def test_self_loops_dropped():
    g = make_graph(np.zeros((3, 1)), [(0, 0), (0, 1)], [0, 0, 0], {})
    assert g.edges.tolist() == [[0, 1]]


def test_two_node_adjacency():
    g = make_graph(np.zeros((2, 1)), [(0, 1)], [0, 1], {})
    np.testing.assert_allclose(normalized_adjacency(g), np.full((2, 2), 0.5), atol=1e-15)


def test_path_graph_entry():
    g = make_graph(np.zeros((3, 1)), [(0, 1), (1, 2)], [0, 0, 0], {})
    adj = normalized_adjacency(g)
    oracle = dense_oracle(3, [(0, 1), (1, 2)])
    assert adj[0, 1] == pytest.approx(1 / math.sqrt(6), abs=1e-15)
    np.testing.assert_allclose(adj, oracle, atol=1e-15)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 12), st.lists(st.tuples(st.integers(0, 11), st.integers(0, 11)), max_size=40))
def test_adjacency_properties(n, pairs):
    pairs = [(u % n, v % n) for u, v in pairs]
    g = make_graph(np.zeros((n, 1)), pairs, np.zeros(n), {})
    adj = normalized_adjacency(g)
    np.testing.assert_array_equal(adj, adj.T)
    assert np.all(adj >= 0) and np.all(adj <= 1) and np.all(np.diag(adj) > 0)
    d = 1.0 + g.degrees()
    np.testing.assert_allclose(np.diag(adj), 1.0 / d, rtol=1e-15)
    np.testing.assert_allclose(adj, dense_oracle(n, g.edges.tolist()), atol=1e-15)


def test_round_trip(tmp_path):
    g, _ = synth_factor_graph(60, 2, 3, 0.3, 0.02, seed=1)
    save_graph(g, tmp_path)
    h = load_graph(tmp_path)
    assert np.array_equal(h.features, g.features)
    assert np.array_equal(h.edges, g.edges)
    assert np.array_equal(h.labels, g.labels)
    for name in ("train", "val", "test"):
        assert np.array_equal(h.split(name), g.split(name))


def test_synth_two_cliques():
    g, factors = synth_factor_graph(10, 1, 2, 1.0, 0.0, seed=0)
    comm = factors[0]
    expected = {(u, v) for u in range(10) for v in range(u + 1, 10) if comm[u] == comm[v]}
    assert {tuple(e) for e in g.edges.tolist()} == expected
    assert len(expected) == 2 * 10


def test_synth_deterministic():
    a, fa = synth_factor_graph(40, 2, 2, 0.3, 0.05, seed=9)
    b, fb = synth_factor_graph(40, 2, 2, 0.3, 0.05, seed=9)
    assert np.array_equal(a.edges, b.edges) and np.array_equal(a.features, b.features)
    assert np.array_equal(fa, fb)


def test_synth_edge_count_binomial():
    n, p_in, p_out = 300, 0.1, 0.005
    g, factors = synth_factor_graph(n, 3, 3, p_in, p_out, seed=4)
    iu, ju = np.triu_indices(n, k=1)
    p_absent = np.ones(iu.size)
    for comm in factors:
        p_absent *= 1.0 - np.where(comm[iu] == comm[ju], p_in, p_out)
    p_edge = 1.0 - p_absent
    mean, sd = p_edge.sum(), math.sqrt((p_edge * (1 - p_edge)).sum())
    assert abs(g.num_edges - mean) < 3 * sd


def test_synth_labels_and_splits():
    g, factors = synth_factor_graph(90, 2, 3, 0.2, 0.01, seed=2, train_per_class=5)
    assert np.array_equal(g.labels, factors[0])
    assert g.train.size == 15
    assert np.bincount(g.labels[g.train]).tolist() == [5, 5, 5]
    assert len(set(g.train) | set(g.val) | set(g.test)) == g.train.size + g.val.size + g.test.size


@pytest.mark.parametrize("kwargs", [{"p_in": 1.5}, {"p_out": -0.1}, {"n": 31}])
def test_synth_invalid(kwargs):
    args = {"n": 30, "M": 2, "per_factor_communities": 3, "p_in": 0.5, "p_out": 0.1, "seed": 0}
    args.update(kwargs)
    with pytest.raises(ConfigError):
        synth_factor_graph(**args)
