"""Synthetic generation, splits and the on-disk graph format."""

import json

import numpy as np
import pytest

from fairforge.graph.generator import SBMConfig, class_probabilities, generate_sbm
from fairforge.graph.graph import Graph, GraphError, InjectionPlan, apply_plan
from fairforge.graph.io import (
    load_graph,
    load_graph_dir,
    read_features,
    save_graph,
    strip_injected,
    write_features,
)
from fairforge.graph.splits import make_split


def labeled_graph(n: int, num_classes: int = 2) -> Graph:
    return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)], features=np.zeros((n, 1)),
                            labels=np.arange(n) % num_classes)


class TestSplits:
    def test_default_sizes(self):
        split = make_split(labeled_graph(100), seed=0)
        assert (len(split.train), len(split.val), len(split.test)) == (50, 25, 25)

    def test_reduced_training_ratio(self):
        split = make_split(labeled_graph(100), ratios=(0.05, 0.25, 0.70), seed=0)
        assert len(split.train) == 5
        assert len(split.val) == 25
        assert len(split.test) == 70

    def test_stratified_within_one(self):
        g = labeled_graph(90, num_classes=3)
        split = make_split(g, seed=3)
        for part, ratio in ((split.train, 0.5), (split.val, 0.25), (split.test, 0.25)):
            counts = np.bincount(g.labels[part], minlength=3)
            assert np.all(np.abs(counts - ratio * 30) <= 1)

    def test_disjoint_cover(self):
        g = labeled_graph(40)
        split = make_split(g, seed=1)
        union = np.concatenate([split.train, split.val, split.test])
        assert sorted(union.tolist()) == list(range(40))

    def test_same_seed_same_split(self):
        g = labeled_graph(60)
        assert make_split(g, seed=5).to_dict() == make_split(g, seed=5).to_dict()

    def test_bad_ratios(self):
        with pytest.raises(GraphError, match="summing to 1"):
            make_split(labeled_graph(20), ratios=(0.5, 0.5, 0.5))

    def test_tiny_class_rejected(self):
        g = Graph.from_edges(6, [], features=np.zeros((6, 1)), labels=[0, 0, 0, 0, 1, 1])
        with pytest.raises(GraphError, match="fewer than 3"):
            make_split(g)


class TestGenerator:
    def test_shapes_and_balance(self):
        graph, split = generate_sbm(n=100, num_features=4, seed=1)
        assert graph.num_nodes == 100
        assert graph.num_features == 4
        assert int(graph.sensitive.sum()) == 50
        assert len(graph.labeled_nodes()) == 100
        assert len(split.train) == 50

    def test_deterministic(self, tmp_path):
        for name in ("a", "b"):
            graph, split = generate_sbm(n=80, seed=9)
            save_graph(graph, tmp_path / name, split=split)
        for file in ("edges.tsv", "features.csv", "labels.csv", "sensitive.csv", "split.json"):
            assert (tmp_path / "a" / file).read_bytes() == (tmp_path / "b" / file).read_bytes()

    def test_range_validation(self):
        with pytest.raises(GraphError, match="p_out <= p_in"):
            generate_sbm(n=60, p_in=0.01, p_out=0.2)
        with pytest.raises(GraphError, match="n must be"):
            SBMConfig(n=10).validate()

    def test_bias_shifts_class_distribution(self):
        probs0 = class_probabilities(2, 0.3, 0)
        probs1 = class_probabilities(2, 0.3, 1)
        assert probs0.tolist() == pytest.approx([0.65, 0.35])
        assert probs1.tolist() == pytest.approx([0.35, 0.65])

    def test_equal_block_probabilities_mix_groups(self):
        fractions = []
        for seed in range(10):
            graph, _ = generate_sbm(n=200, p_in=0.05, p_out=0.05, seed=seed)
            edges = graph.edge_array()
            same = graph.sensitive[edges[:, 0]] == graph.sensitive[edges[:, 1]]
            fractions.append(same.mean())
        # a random neighbour shares the group about half the time
        assert abs(np.mean(fractions) - 0.5) < 0.05


class TestFiles:
    def test_toy_fixture(self, toy_dir):
        bundle = load_graph_dir(toy_dir)
        graph = bundle.graph
        assert graph.num_nodes == 12
        assert graph.num_edges == 15
        assert graph.neighbors(0).tolist() == [1, 5, 6]
        assert bundle.split.test.tolist() == [3, 7, 11]
        assert bundle.plan is None

    def test_three_node_files(self, tmp_path):
        (tmp_path / "e.tsv").write_text("0\t1\n1\t0\n1\t2\n")
        (tmp_path / "x.csv").write_text("1,0\n0,1\n1,1\n")
        (tmp_path / "y.csv").write_text("0,0\n1,1\n2,-1\n")
        (tmp_path / "s.csv").write_text("0,0\n1,1\n2,0\n")
        g = load_graph(tmp_path / "e.tsv", tmp_path / "x.csv", tmp_path / "y.csv",
                       tmp_path / "s.csv")
        assert g.adjacency.toarray().tolist() == [[0, 1, 0], [1, 0, 1], [0, 1, 0]]
        assert g.num_edges == 2
        assert g.labels.tolist() == [0, 1, -1]

    def test_non_binary_sensitive(self, tmp_path):
        (tmp_path / "e.tsv").write_text("0\t1\n")
        (tmp_path / "x.csv").write_text("1\n0\n")
        (tmp_path / "y.csv").write_text("0,0\n1,1\n")
        (tmp_path / "s.csv").write_text("0,0\n1,2\n")
        with pytest.raises(GraphError, match="non-binary"):
            load_graph(tmp_path / "e.tsv", tmp_path / "x.csv", tmp_path / "y.csv",
                       tmp_path / "s.csv")

    def test_missing_coverage(self, tmp_path):
        (tmp_path / "e.tsv").write_text("0\t1\n")
        (tmp_path / "x.csv").write_text("1\n0\n0\n")
        (tmp_path / "y.csv").write_text("0,0\n1,1\n")
        (tmp_path / "s.csv").write_text("0,0\n1,1\n2,0\n")
        with pytest.raises(GraphError, match="missing \\[2\\]"):
            load_graph(tmp_path / "e.tsv", tmp_path / "x.csv", tmp_path / "y.csv",
                       tmp_path / "s.csv")

    def test_binary_features(self, tmp_path):
        features = np.array([[0.5, -1.25], [2.0, 3.0], [0.0, 1.0]])
        write_features(tmp_path / "f.bin", features)
        raw = (tmp_path / "f.bin").read_bytes()
        assert len(raw) == 8 + 6 * 4
        assert np.frombuffer(raw[:8], dtype="<u4").tolist() == [3, 2]
        assert np.array_equal(read_features(tmp_path / "f.bin"), features)

    def test_truncated_binary(self, tmp_path):
        (tmp_path / "f.bin").write_bytes(np.array([4, 2], dtype="<u4").tobytes() + b"\0" * 8)
        with pytest.raises(GraphError, match="header says"):
            read_features(tmp_path / "f.bin")

    def test_roundtrip_full_precision(self, tmp_path, small_sbm):
        graph, split = small_sbm
        save_graph(graph, tmp_path / "g", split=split)
        bundle = load_graph_dir(tmp_path / "g")
        assert bundle.graph.equals(graph)
        assert bundle.split.to_dict() == split.to_dict()

    def test_poisoned_directory(self, tmp_path, four_nodes):
        plan = InjectionPlan(targets_by_group=([0, 2], [1]), groups=[0, 1],
                             edges=[(0, 0), (0, 2), (1, 1)], features=[[1.5, 2.5], [3.0, 4.0]],
                             node_budget=2, degree_budget=2, seed=3)
        poisoned = apply_plan(four_nodes, plan)
        save_graph(poisoned, tmp_path / "p", plan=plan)
        sidecar = json.loads((tmp_path / "p" / "plan.json").read_text())
        assert sidecar["clean_nodes"] == 4
        assert sidecar["edges"] == [[0, 0], [0, 2], [1, 1]]

        bundle = load_graph_dir(tmp_path / "p")
        assert bundle.graph.injected.tolist() == [False] * 4 + [True, True]
        assert bundle.plan.to_dict() == plan.to_dict()
        assert strip_injected(bundle.graph, bundle.clean_nodes).equals(four_nodes)

    def test_missing_directory(self, tmp_path):
        with pytest.raises(GraphError, match="not found"):
            load_graph_dir(tmp_path / "nope")
