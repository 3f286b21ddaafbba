"""Monte Carlo dropout training, per-node uncertainty and target selection."""

import numpy as np
import pytest

from fairforge.attack.uncertainty import (
    UncertaintyError,
    UncertaintyReport,
    bayesian_gradient_fn,
    estimate_uncertainty,
    sample_masks,
    select_targets,
    selection_size,
    stochastic_passes,
    train_bayesian,
)
from fairforge.graph.generator import generate_sbm
from fairforge.graph.graph import Graph, Split
from fairforge.models.checkpoint import params_to_bytes
from fairforge.models.gcn import init_params, normalize_adjacency
from fairforge.models.gradcheck import numerical_gradient, relative_error

from conftest import random_graph


def ten_nodes() -> Graph:
    return Graph.from_edges(10, [(i, (i + 1) % 10) for i in range(10)],
                            features=np.zeros((10, 1)), labels=np.arange(10) % 2,
                            sensitive=[0] * 5 + [1] * 5)


class TestMasks:
    def test_keep_rate(self):
        params = init_params("gcn", 100, 2, hidden=100)
        masks = sample_masks(params, 0.5, np.random.default_rng(0))
        assert 0.48 <= masks.m1.mean() <= 0.52
        assert set(np.unique(masks.m2)) <= {0.0, 1.0}

    def test_keep_all(self):
        params = init_params("gcn", 4, 2, hidden=3)
        masks = sample_masks(params, 1.0, np.random.default_rng(0))
        assert masks.m1.all() and masks.m2.all()

    @pytest.mark.parametrize("keep_prob", [0.0, 1.5, -0.1])
    def test_invalid_keep_prob(self, keep_prob):
        with pytest.raises(UncertaintyError, match="keep probability"):
            sample_masks(init_params("sgc", 2, 2), keep_prob, np.random.default_rng(0))


class TestEstimate:
    def test_deterministic_model_has_no_uncertainty(self):
        g = random_graph(12, 0.3, 3, seed=0)
        params = init_params("gcn", 3, 2, hidden=6, seed=1)
        assert not estimate_uncertainty(params, g, samples=5, keep_prob=1.0).any()

    def test_deterministic_model_selects_by_node_id(self):
        graph, _ = generate_sbm(n=120, num_features=6, seed=0)
        params = init_params("gcn", 6, 2, hidden=8, seed=1)
        scores = estimate_uncertainty(params, graph, samples=5, keep_prob=1.0)
        candidates = graph.labeled_nodes()
        targets = select_targets(scores, graph, candidates, 0.25)
        for group, chosen in enumerate(targets):
            pool = np.sort(candidates[graph.sensitive[candidates] == group])
            assert chosen.tolist() == pool[:len(chosen)].tolist()

    def test_single_pass_has_no_uncertainty(self):
        g = random_graph(12, 0.3, 3, seed=0)
        params = init_params("gcn", 3, 2, hidden=6, seed=1, keep_prob=0.5)
        assert not estimate_uncertainty(params, g, samples=1, keep_prob=0.5).any()

    def test_matches_naive_variance(self):
        g = random_graph(5, 0.5, 3, seed=4)
        params = init_params("gcn", 3, 2, hidden=6, seed=2, keep_prob=0.5)
        passes = stochastic_passes(params, g, samples=7, keep_prob=0.5, seed=3)
        expected = np.zeros(5)
        for node in range(5):
            for cls in range(2):
                values = [passes[t, node, cls] for t in range(7)]
                mean = sum(values) / 7
                expected[node] += sum((v - mean) ** 2 for v in values) / 7
        got = estimate_uncertainty(params, g, samples=7, keep_prob=0.5, seed=3)
        assert np.allclose(got, expected, atol=1e-12)
        assert (got >= 0).all()

    def test_same_seed_same_passes(self):
        g = random_graph(8, 0.4, 3, seed=1)
        params = init_params("gcn", 3, 2, hidden=6, seed=2, keep_prob=0.5)
        a = stochastic_passes(params, g, 4, 0.5, seed=9)
        b = stochastic_passes(params, g, 4, 0.5, seed=9)
        assert np.array_equal(a, b)
        assert not np.array_equal(a[0], a[1])

    def test_zero_samples_rejected(self):
        g = random_graph(5, 0.5, 3, seed=4)
        with pytest.raises(UncertaintyError, match="sample count"):
            estimate_uncertainty(init_params("gcn", 3, 2, hidden=2), g, samples=0)


class TestBayesianTraining:
    def test_objective_gradient(self):
        g = random_graph(10, 0.3, 3, seed=2)
        split = Split(train=np.arange(6), val=[6, 7], test=[8, 9])
        objective = bayesian_gradient_fn(g, split, samples=3, keep_prob=0.5)
        params = init_params("gcn", 3, 2, hidden=4, seed=5, keep_prob=0.5)
        rng = np.random.default_rng(1)
        # masked-out columns leave b1 alone in the pre-activation; keep it off the ReLU kink
        params = params.with_arrays({"b1": rng.normal(0.0, 0.5, 4), "b2": rng.normal(0.0, 0.5, 2)})
        _, grads = objective(params, np.random.default_rng(0))

        work = params.copy()
        for name, array in work.arrays().items():
            numeric = numerical_gradient(
                lambda: objective(work, np.random.default_rng(0))[0], array)
            assert relative_error(grads[name], numeric) < 1e-4, name

    def test_zero_weights_give_uniform_loss(self):
        # the weight penalty vanishes at theta = 0
        g = random_graph(10, 0.3, 3, seed=2)
        split = Split(train=np.arange(6), val=[6, 7], test=[8, 9])
        params = init_params("gcn", 3, 2, hidden=4, seed=5, keep_prob=0.5)
        zero = params.with_arrays({name: np.zeros_like(a) for name, a in params.arrays().items()})
        loss, grads = bayesian_gradient_fn(g, split, 2, 0.5)(zero, np.random.default_rng(0))
        assert loss == pytest.approx(np.log(2))
        assert not grads["w1"].any()

    def test_small_run_is_deterministic(self, small_sbm):
        graph, split = small_sbm
        adj = normalize_adjacency(graph)
        first = train_bayesian(graph, split, samples=2, hidden=8, epochs=3, seed=1, adj=adj)
        second = train_bayesian(graph, split, samples=2, hidden=8, epochs=3, seed=1, adj=adj)
        assert params_to_bytes(first) == params_to_bytes(second)
        assert first.keep_prob == 0.5
        assert first.is_finite()


class TestSelection:
    UNCERTAINTY = np.array([0.1, 0.5, 0.5, 0.2, 0.9, 0.3, 0.3, 0.3, 0.0, 0.1])

    def test_top_half_per_group(self):
        t0, t1 = select_targets(self.UNCERTAINTY, ten_nodes(), np.arange(10), 0.5)
        assert t0.tolist() == [1, 2, 4]
        # three-way tie broken by lower id
        assert t1.tolist() == [5, 6, 7]

    def test_candidates_restrict_pool(self):
        t0, t1 = select_targets(self.UNCERTAINTY, ten_nodes(), [0, 1, 3, 5, 6, 8], 0.5)
        assert t0.tolist() == [1, 3]
        assert t1.tolist() == [5, 6]

    def test_all_candidates(self):
        t0, t1 = select_targets(self.UNCERTAINTY, ten_nodes(), np.arange(10), 1.0)
        assert t0.tolist() == [0, 1, 2, 3, 4]
        assert t1.tolist() == [5, 6, 7, 8, 9]

    def test_selection_size(self):
        assert selection_size(0.5, 3) == 2
        assert selection_size(0.1, 30) == 3
        assert selection_size(0.01, 1) == 1

    def test_group_without_candidates(self):
        with pytest.raises(UncertaintyError, match="group 1 has no candidate"):
            select_targets(self.UNCERTAINTY, ten_nodes(), [0, 1, 2], 0.5)

    def test_bad_fraction(self):
        with pytest.raises(UncertaintyError, match="k_percent"):
            select_targets(self.UNCERTAINTY, ten_nodes(), np.arange(10), 0.0)


class TestReport:
    def test_csv(self, tmp_path):
        graph = ten_nodes()
        targets = select_targets(TestSelection.UNCERTAINTY, graph, np.arange(10), 0.5)
        report = UncertaintyReport(TestSelection.UNCERTAINTY, samples=20, keep_prob=0.5,
                                   targets_by_group=targets, sensitive=graph.sensitive)
        report.to_csv(tmp_path / "u.csv")
        lines = (tmp_path / "u.csv").read_text().splitlines()
        assert lines[0] == "node,group,uncertainty,selected"
        assert lines[5] == "4,0,0.90000000000000002,1"
        assert len(lines) == 11
        assert report.selected.sum() == 6

    def test_cross_group_targets_rejected(self):
        graph = ten_nodes()
        with pytest.raises(UncertaintyError, match="other group"):
            UncertaintyReport(np.zeros(10), 2, 0.5, (np.array([5]), np.array([6])),
                              graph.sensitive)
