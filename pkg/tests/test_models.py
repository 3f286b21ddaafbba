"""GCN/SGC forward and backward passes, training loop and checkpoints."""

import numpy as np
import pytest
import scipy.sparse as sp

from fairforge.graph.graph import Graph, Split
from fairforge.models.checkpoint import load_params, params_from_bytes, params_to_bytes, save_params
from fairforge.models.gcn import (
    ModelKind,
    ModelParams,
    ModelShapeError,
    WeightMasks,
    backward,
    forward,
    init_params,
    normalize_adjacency,
    predict_proba,
)
from fairforge.models.gradcheck import check_gradients
from fairforge.models.losses import LossSpec
from fairforge.models.training import AdamOptimizer, TrainingError, accuracy, train

from conftest import random_graph


class TestNormalizeAdjacency:
    def test_isolated_node(self):
        g = Graph.from_edges(1, [], features=np.zeros((1, 1)))
        assert normalize_adjacency(g).toarray().tolist() == [[1.0]]

    def test_single_edge(self):
        g = Graph.from_edges(2, [(0, 1)], features=np.zeros((2, 1)))
        assert np.allclose(normalize_adjacency(g).toarray(), 0.5)

    def test_path_middle_row(self):
        g = Graph.from_edges(3, [(0, 1), (1, 2)], features=np.zeros((3, 1)))
        row = normalize_adjacency(g).toarray()[1]
        assert row == pytest.approx([1 / np.sqrt(6), 1 / 3, 1 / np.sqrt(6)])

    def test_symmetric(self):
        adj = normalize_adjacency(random_graph(15, 0.3, 2, seed=1))
        assert abs(adj - adj.T).max() < 1e-15

    def test_accepts_raw_sparse_matrix(self, four_nodes):
        from_matrix = normalize_adjacency(sp.csr_matrix(four_nodes.adjacency))
        assert abs(from_matrix - normalize_adjacency(four_nodes)).max() == 0


class TestForward:
    def test_zero_weights_zero_logits(self):
        g = random_graph(6, 0.5, 3, seed=0)
        params = init_params("gcn", 3, 2, hidden=4)
        params = params.with_arrays({"w1": np.zeros((3, 4)), "w2": np.zeros((4, 2))})
        assert np.all(forward(params, normalize_adjacency(g), g.features) == 0)

    def test_hand_computed_path(self):
        g = Graph.from_edges(3, [(0, 1), (1, 2)], features=np.eye(3))
        adj = normalize_adjacency(g)
        w1 = np.array([[1.0], [0.0], [-1.0]])
        w2 = np.array([[1.0, -1.0]])
        params = ModelParams(ModelKind.GCN2, w1, np.zeros(1), w2, np.zeros(2))

        dense = adj.toarray()
        hidden = np.maximum(dense @ w1, 0.0)
        expected = dense @ hidden @ w2
        assert np.allclose(forward(params, adj, g.features), expected)
        # node 0 leans on feature 0, node 2 on feature 2
        assert hidden[0, 0] > 0 and hidden[2, 0] == 0

    def test_sgc_two_hops(self):
        g = random_graph(8, 0.4, 3, seed=2)
        adj = normalize_adjacency(g)
        params = init_params("sgc", 3, 2, seed=1)
        expected = adj @ (adj @ g.features) @ params.w1 + params.b1
        assert np.allclose(forward(params, adj, g.features), expected)

    def test_all_ones_masks_match_unmasked(self):
        g = random_graph(8, 0.4, 3, seed=2)
        adj = normalize_adjacency(g)
        params = init_params("gcn", 3, 2, hidden=5, seed=4)
        masked = forward(params, adj, g.features, WeightMasks.ones(params))
        assert np.array_equal(masked, forward(params, adj, g.features))

    def test_softmax_rows_sum_to_one(self):
        g = random_graph(10, 0.4, 3, seed=3)
        params = init_params("gcn", 3, 3, hidden=5, seed=4)
        probs = predict_proba(params, normalize_adjacency(g), g.features)
        assert np.all(np.abs(probs.sum(axis=1) - 1.0) < 1e-9)

    def test_shape_mismatch(self):
        g = random_graph(6, 0.5, 3, seed=0)
        params = init_params("gcn", 4, 2, hidden=4)
        with pytest.raises(ModelShapeError):
            forward(params, normalize_adjacency(g), g.features)

    def test_mask_shape_mismatch(self):
        g = random_graph(6, 0.5, 3, seed=0)
        params = init_params("gcn", 3, 2, hidden=4)
        with pytest.raises(ModelShapeError, match="m1"):
            forward(params, normalize_adjacency(g), g.features, WeightMasks(np.ones((2, 2)),
                                                                          np.ones((4, 2))))


class TestBackward:
    @pytest.mark.parametrize("weights", [
        {"ce": 1.0},
        {"sp": 1.0},
        {"eo": 1.0},
        {"cf": 1.0},
        {"ce": 1.0, "cf": 0.01, "sp": 4.0, "eo": 4.0},
    ])
    def test_finite_differences_gcn(self, grad_instance, weights):
        graph, train_idx, rows, plan = grad_instance
        spec = LossSpec(labels=graph.labels, train_idx=train_idx, sensitive=graph.sensitive,
                        weights=weights, injected_rows=rows, injected_groups=plan.groups)
        params = init_params("gcn", 5, 2, hidden=4, seed=3)
        errors = check_gradients(params, normalize_adjacency(graph), graph.features, spec,
                                 rows=rows)
        assert set(errors) == {"w1", "b1", "w2", "b2", "features"}
        assert max(errors.values()) < 1e-4, errors

    def test_finite_differences_vector_eo(self, grad_instance):
        graph, train_idx, rows, plan = grad_instance
        spec = LossSpec(labels=graph.labels, train_idx=train_idx, sensitive=graph.sensitive,
                        weights={"eo": 1.0}, eo_form="vector")
        params = init_params("gcn", 5, 2, hidden=4, seed=5)
        errors = check_gradients(params, normalize_adjacency(graph), graph.features, spec,
                                 rows=rows)
        assert max(errors.values()) < 1e-4, errors

    def test_finite_differences_sgc_masked(self, grad_instance):
        graph, train_idx, rows, plan = grad_instance
        spec = LossSpec.attack(graph.labels, train_idx, graph.sensitive, 0.01, 4.0, rows,
                               plan.groups)
        params = init_params("sgc", 5, 2, seed=1)
        masks = WeightMasks(np.random.default_rng(0).integers(0, 2, (5, 2)).astype(float))
        errors = check_gradients(params, normalize_adjacency(graph), graph.features, spec,
                                 rows=rows, masks=masks)
        assert max(errors.values()) < 1e-4, errors

    def test_unreachable_rows_have_zero_gradient(self):
        # nodes 0-3 and 4-5 form separate components
        g = Graph.from_edges(6, [(0, 1), (1, 2), (2, 3), (4, 5)],
                             features=np.random.default_rng(0).normal(size=(6, 3)),
                             labels=[0, 1, 0, 1, 0, 1])
        params = init_params("gcn", 3, 2, hidden=4, seed=0)
        result = backward(params, normalize_adjacency(g), g.features, None,
                          LossSpec.cross_entropy(g.labels, [0, 1, 2, 3]), rows=[4, 5])
        assert np.all(result.features == 0)

    def test_scaling_loss_scales_gradients(self, grad_instance):
        graph, train_idx, rows, _ = grad_instance
        adj = normalize_adjacency(graph)
        params = init_params("gcn", 5, 2, hidden=4, seed=3)
        spec = LossSpec.cross_entropy(graph.labels, train_idx)
        doubled = LossSpec(labels=graph.labels, train_idx=train_idx, scale=2.0)
        one = backward(params, adj, graph.features, None, spec, rows=rows)
        two = backward(params, adj, graph.features, None, doubled, rows=rows)
        for name in one.params:
            assert np.allclose(two.params[name], 2 * one.params[name])
        assert np.allclose(two.features, 2 * one.features)
        assert two.loss == pytest.approx(2 * one.loss)


def separable_graph(n: int = 60, seed: int = 0):
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % 2
    features = np.column_stack([labels * 2.0 - 1.0, rng.normal(size=n) * 0.1])
    features[:, 0] += rng.normal(size=n) * 0.2
    same = [(i, j) for i in range(n) for j in range(i + 2, min(n, i + 7), 2)]
    graph = Graph.from_edges(n, same, features=features, labels=labels,
                             sensitive=(np.arange(n) // 2) % 2)
    idx = np.arange(n)
    return graph, Split(train=idx[: n // 2], val=idx[n // 2: 3 * n // 4], test=idx[3 * n // 4:])


class TestTraining:
    def test_separable_toy_reaches_high_accuracy(self):
        graph, split = separable_graph()
        params = init_params("gcn", 2, 2, hidden=16, seed=0)
        trained = train(params, graph, split, epochs=200, lr=0.01, seed=0)
        logits = forward(trained, normalize_adjacency(graph), graph.features)
        assert accuracy(logits, graph.labels, split.train) > 0.95

    def test_zero_epochs_returns_initial(self):
        graph, split = separable_graph()
        params = init_params("gcn", 2, 2, hidden=4, seed=0)
        assert train(params, graph, split, epochs=0).equals(params)

    def test_deterministic(self):
        graph, split = separable_graph()
        params = init_params("gcn", 2, 2, hidden=8, seed=2)
        first = train(params, graph, split, epochs=30, seed=1)
        second = train(params, graph, split, epochs=30, seed=1)
        assert params_to_bytes(first) == params_to_bytes(second)

    def test_non_finite_loss_aborts(self):
        graph, split = separable_graph()
        params = init_params("gcn", 2, 2, hidden=4, seed=0)
        broken = params.with_arrays({"b2": np.array([np.nan, 0.0])})
        with pytest.raises(TrainingError) as info:
            train(broken, graph, split, epochs=5)
        assert info.value.diagnostics["epoch"] == 1

    def test_empty_train_split(self):
        graph, split = separable_graph()
        with pytest.raises(TrainingError, match="empty"):
            train(init_params("gcn", 2, 2, hidden=4), graph, split.replace(train=[]), epochs=5)

    def test_adam_moments_resume(self):
        params = init_params("sgc", 2, 2, seed=0)
        grads = {name: np.ones_like(arr) for name, arr in params.arrays().items()}
        optimizer = AdamOptimizer(lr=0.1)
        first = optimizer.step(params, grads)
        optimizer.step(first, grads)
        assert optimizer.t == 2
        # bias-corrected first step moves every weight by exactly lr
        assert np.allclose(params.w1 - first.w1, 0.1, atol=1e-6)

    def test_expected_scales_weights_only(self):
        params = init_params("gcn", 3, 2, hidden=4, seed=0, keep_prob=0.5)
        params = params.with_arrays({"b1": np.ones(4)})
        expected = params.expected()
        assert np.array_equal(expected.w1, 0.5 * params.w1)
        assert np.array_equal(expected.w2, 0.5 * params.w2)
        assert np.array_equal(expected.b1, params.b1)


class TestCheckpoint:
    def test_file_roundtrip(self, tmp_path):
        params = init_params("gcn", 5, 3, hidden=7, seed=11, keep_prob=0.5)
        save_params(params, tmp_path / "model.ckpt")
        restored = load_params(tmp_path / "model.ckpt")
        assert restored.equals(params)
        assert restored.kind is ModelKind.GCN2
        assert restored.keep_prob == 0.5
        assert restored.seed == 11

    def test_arrays_keep_their_names(self):
        params = init_params("gcn", 5, 3, hidden=7, seed=11)
        params.b2[:] = [0.5, -1.0, 2.0]
        restored = params_from_bytes(params_to_bytes(params))
        for name, arr in params.arrays().items():
            np.testing.assert_array_equal(getattr(restored, name), arr, err_msg=name)
        assert not restored.b1.any()

    def test_sgc_has_no_second_layer(self):
        params = init_params("sgc", 4, 2, seed=0, hops=3)
        restored = params_from_bytes(params_to_bytes(params))
        assert restored.w2 is None and restored.hops == 3

    def test_rejects_foreign_bytes(self):
        with pytest.raises(ValueError, match="checkpoint"):
            params_from_bytes(b"not a checkpoint")

    def test_rejects_trailing_bytes(self):
        data = params_to_bytes(init_params("sgc", 2, 2))
        with pytest.raises(ValueError, match="trailing"):
            params_from_bytes(data + b"\0" * 8)

