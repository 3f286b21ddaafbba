import numpy as np
import pytest

from fairforge.attack.injection import (
    build_plan,
    clamp_features,
    init_features,
    integer_columns,
    random_targets,
    round_features,
    split_budget,
)
from fairforge.graph.graph import Graph, GraphError, apply_plan
from fairforge.utils.logger import LogCapture


def rng(seed: int = 0) -> np.random.Generator:
    return np.random.default_rng(seed)


class TestBuildPlan:
    @pytest.mark.parametrize("b, expected", [(1, (1, 0)), (4, (2, 2)), (5, (3, 2))])
    def test_split_budget(self, b, expected):
        assert split_budget(b) == expected

    def test_groups_and_degrees(self):
        plan = build_plan(([0, 2, 4], [1, 3]), node_budget=3, degree_budget=2, rng=rng(),
                          num_features=2)
        assert plan.groups.tolist() == [0, 0, 1]
        assert plan.injected_degrees().tolist() == [2, 2, 2]
        for local, target in plan.edges:
            allowed = {0, 2, 4} if plan.groups[local] == 0 else {1, 3}
            assert target in allowed
        # group 1 pool has exactly d targets
        assert plan.edges[plan.edges[:, 0] == 2, 1].tolist() == [1, 3]
        assert plan.same_group

    def test_degree_capped_by_pool(self):
        plan = build_plan(([0, 2, 4], [1]), node_budget=2, degree_budget=5, rng=rng())
        assert plan.injected_degrees().tolist() == [3, 1]

    def test_empty_pool_share_reassigned(self):
        with LogCapture() as capture:
            plan = build_plan(([], [1, 3]), node_budget=3, degree_budget=1, rng=rng())
        assert plan.groups.tolist() == [1, 1, 1]
        assert any("no targets" in m for m in capture.get_messages("WARNING"))

    def test_both_pools_empty(self):
        with pytest.raises(GraphError, match="both target sets"):
            build_plan(([], []), node_budget=2, degree_budget=1, rng=rng())

    def test_invalid_budget(self):
        with pytest.raises(GraphError, match="budgets"):
            build_plan(([0], [1]), node_budget=0, degree_budget=1, rng=rng())

    def test_mixed_draws_from_union(self):
        plan = build_plan(([0], [1]), node_budget=2, degree_budget=2, rng=rng(), mixed=True)
        assert not plan.same_group
        assert plan.edges.tolist() == [[0, 0], [0, 1], [1, 0], [1, 1]]

    def test_plan_applies_cleanly(self, four_nodes):
        plan = build_plan(([0, 2], [1, 3]), node_budget=4, degree_budget=2, rng=rng(3),
                          num_features=2)
        poisoned = apply_plan(four_nodes, plan)
        assert poisoned.num_nodes == 8
        assert poisoned.num_edges == four_nodes.num_edges + 8

    def test_same_seed_same_plan(self):
        a = build_plan((np.arange(0, 20, 2), np.arange(1, 20, 2)), 6, 3, rng(7))
        b = build_plan((np.arange(0, 20, 2), np.arange(1, 20, 2)), 6, 3, rng(7))
        assert a.to_dict() == b.to_dict()


class TestTargets:
    def test_random_targets_per_group(self, four_nodes):
        t0, t1 = random_targets(four_nodes, [0, 1, 2, 3], (2, 1), rng())
        assert t0.tolist() == [0, 2]
        assert len(t1) == 1 and four_nodes.sensitive[t1[0]] == 1

    def test_random_targets_capped(self, four_nodes):
        t0, t1 = random_targets(four_nodes, [0, 1, 3], (5, 5), rng())
        assert t0.tolist() == [0]
        assert t1.tolist() == [1, 3]


class TestFeatures:
    def test_uniform_inside_bounds(self, four_nodes):
        plan = build_plan(([0, 2], [1, 3]), node_budget=4000, degree_budget=1, rng=rng(),
                          num_features=2)
        features = init_features(plan, four_nodes, "uniform", rng(1))
        assert features.shape == (4000, 2)
        assert (features[:, 0] >= 0).all() and (features[:, 0] <= 6).all()
        assert (features[:, 1] >= 1).all() and (features[:, 1] <= 7).all()
        assert features.mean(axis=0) == pytest.approx([3.0, 4.0], abs=0.1)

    def test_constant_column_stays_constant(self):
        clean = Graph.from_edges(3, [(0, 1), (1, 2)],
                                 features=[[5.0, 0.0], [5.0, 1.0], [5.0, 2.0]],
                                 sensitive=[0, 1, 0])
        plan = build_plan(([0, 2], [1]), node_budget=3, degree_budget=1, rng=rng())
        features = init_features(plan, clean, "uniform", rng(2))
        assert (features[:, 0] == 5.0).all()

    def test_target_mean_without_noise(self, four_nodes):
        plan = build_plan(([0, 2], [1, 3]), node_budget=2, degree_budget=2, rng=rng())
        features = init_features(plan, four_nodes, "target_mean", rng(), noise=0.0)
        # rows of four_nodes are [2i, 2i + 1]
        assert features.tolist() == [[2.0, 3.0], [4.0, 5.0]]

    def test_unknown_strategy(self, four_nodes):
        plan = build_plan(([0, 2], [1, 3]), node_budget=2, degree_budget=2, rng=rng())
        with pytest.raises(ValueError):
            init_features(plan, four_nodes, "gaussian")

    def test_clamp(self, four_nodes):
        clamped = clamp_features(np.array([[-10.0, 10.0], [3.0, 4.0]]), four_nodes)
        assert clamped.tolist() == [[0.0, 7.0], [3.0, 4.0]]

    def test_round_to_integers_inside_bounds(self, four_nodes):
        rounded = round_features(np.array([[2.4, 6.6], [-3.0, 9.0]]), four_nodes)
        assert rounded.tolist() == [[2.0, 7.0], [0.0, 7.0]]

    def test_column_without_integer_is_left_in_bounds(self):
        clean = Graph.from_edges(3, [(0, 1), (1, 2)],
                                 features=[[0.2, 1.0], [0.4, 2.0], [0.3, 3.0]],
                                 sensitive=[0, 1, 0])
        assert integer_columns(clean).tolist() == [False, True]
        with LogCapture() as capture:
            rounded = round_features(np.array([[0.9, 2.6], [0.1, 0.2]]), clean)
        assert rounded[:, 0].tolist() == [0.4, 0.2]
        assert rounded[:, 1].tolist() == [3.0, 1.0]
        assert any("no integer" in m for m in capture.get_messages("WARNING"))
