"""End-to-end attack runs on a small SBM with test-sized settings."""

from dataclasses import replace

import numpy as np
import pytest

from fairforge.attack import uncertainty
from fairforge.attack.config import AttackConfig, AttackVariant
from fairforge.attack.injection import init_features
from fairforge.attack.optimizer import (
    LOG_COLUMNS,
    AttackAbortedError,
    AttackLog,
    run_ablation,
    run_attack,
)
from fairforge.attack.validation import validate_poisoned
from fairforge.core.config_manager import ConfigError
from fairforge.core.event_bus import EventBus
from fairforge.graph.graph import apply_plan
from fairforge.models.checkpoint import params_to_bytes
from fairforge.models.gcn import ModelKind, init_params
from fairforge.models.training import train
from fairforge.utils.rng import derive_rng, derive_seed


def pretrained_surrogate(graph, split, cfg: AttackConfig):
    initial = init_params(ModelKind.GCN2, graph.num_features, graph.num_classes,
                          hidden=cfg.hidden, seed=derive_seed(cfg.seed, "surrogate"))
    return train(initial, graph, split, epochs=cfg.bayes_epochs, lr=cfg.lr_surrogate,
                 seed=derive_seed(cfg.seed, "surrogate-train"))


class TestConfig:
    def test_defaults(self):
        cfg = AttackConfig()
        assert (cfg.alpha, cfg.beta, cfg.k_percent) == (0.01, 4.0, 0.5)
        assert (cfg.max_iter, cfg.max_step, cfg.samples) == (20, 50, 20)
        assert cfg.validate() == []

    def test_budgets_resolved_from_graph(self, small_sbm):
        graph, _ = small_sbm
        cfg = AttackConfig().resolve_budgets(graph)
        assert cfg.node_budget == 1
        assert cfg.degree_budget == max(1, int(np.floor(graph.degrees().mean() + 0.5)))

    def test_field_path_errors(self):
        errors = AttackConfig(k_percent=1.5, alpha=-1, node_budget=0).validate()
        assert any(e.startswith("attack.k_percent") for e in errors)
        assert any(e.startswith("attack.alpha") for e in errors)
        assert any(e.startswith("attack.node_budget") for e in errors)

    def test_variant_aliases(self):
        assert AttackVariant.parse("u") is AttackVariant.RANDOM_TARGETS
        assert AttackVariant.parse("Mixed-Groups") is AttackVariant.MIXED_GROUPS
        assert AttackVariant.parse("i") is AttackVariant.FROZEN_SURROGATE
        with pytest.raises(ValueError):
            AttackVariant.parse("full-x")

    def test_from_dict_accepts_prefixed_keys(self):
        cfg = AttackConfig.from_dict({"attack.beta": 2.0, "alpha": 0.5, "victim.epochs": 3})
        assert (cfg.alpha, cfg.beta) == (0.5, 2.0)

    def test_invalid_config_rejected(self, small_sbm):
        graph, split = small_sbm
        with pytest.raises(ConfigError) as info:
            run_attack(graph, split, AttackConfig(k_percent=0.0))
        assert info.value.errors[0].startswith("attack.k_percent")


class TestRunAttack:
    def test_poisoned_graph_is_valid(self, small_sbm, fast_attack):
        graph, split = small_sbm
        result = run_attack(graph, split, fast_attack)
        assert result.poisoned.num_nodes == graph.num_nodes + 4
        assert validate_poisoned(graph, result.poisoned, result.plan) == []
        assert result.plan.metadata["variant"] == "full"
        assert result.report is not None and result.bayesian is not None
        # both surrogate and feature phases run every step
        assert len(result.log) == 2 * 2 * 3

    def test_zero_iterations_keep_initial_features(self, small_sbm, fast_attack):
        graph, split = small_sbm
        result = run_attack(graph, split, replace(fast_attack, max_iter=0))
        expected = init_features(result.plan, graph, "uniform",
                                 derive_rng(fast_attack.seed, "init-features"), 0.01)
        assert np.array_equal(result.plan.features, expected)
        assert result.poisoned.equals(apply_plan(graph, result.plan))
        assert len(result.log) == 0

    def test_large_steps_stay_inside_bounds(self, small_sbm, fast_attack):
        graph, split = small_sbm
        result = run_attack(graph, split, replace(fast_attack, lr_feature=1e3))
        low, high = graph.feature_bounds()
        injected = result.poisoned.features[graph.num_nodes:]
        assert (injected >= low).all() and (injected <= high).all()

    def test_discrete_features_are_integers(self, small_sbm, fast_attack):
        graph, split = small_sbm
        result = run_attack(graph, split, replace(fast_attack, discrete_features=True))
        injected = result.poisoned.features[graph.num_nodes:]
        assert np.array_equal(injected, np.rint(injected))
        assert validate_poisoned(graph, result.poisoned, result.plan, discrete=True) == []

    def test_same_seed_same_result(self, small_sbm, fast_attack):
        graph, split = small_sbm
        first = run_attack(graph, split, fast_attack)
        second = run_attack(graph, split, fast_attack)
        assert first.poisoned.equals(second.poisoned)
        assert first.plan.to_dict() == second.plan.to_dict()
        assert first.log.rows == second.log.rows

    def test_targets_follow_uncertainty(self, small_sbm, fast_attack):
        graph, split = small_sbm
        result = run_attack(graph, split, fast_attack)
        scores = result.report.uncertainty
        for group, targets in enumerate(result.plan.targets_by_group):
            pool = np.flatnonzero(graph.sensitive == group)
            others = np.setdiff1d(pool, targets)
            assert scores[targets].min() >= scores[others].max()
            assert len(targets) == int(np.ceil(0.5 * pool.size))

    def test_step_events_reach_subscribers(self, small_sbm, fast_attack):
        graph, split = small_sbm
        bus = EventBus()
        seen = AttackLog().attach(bus)
        result = run_attack(graph, split, fast_attack, bus=bus)
        assert seen.rows == result.log.rows

    def test_log_csv(self, small_sbm, fast_attack, tmp_path):
        graph, split = small_sbm
        result = run_attack(graph, split, replace(fast_attack, max_iter=1))
        result.log.to_csv(tmp_path / "log.csv")
        lines = (tmp_path / "log.csv").read_text().splitlines()
        assert lines[0] == ",".join(LOG_COLUMNS)
        assert len(lines) == 1 + 2 * 3
        assert lines[1].startswith("0,0,surrogate,")
        assert lines[4].startswith("0,0,feature,")

    def test_single_group_training_split(self, small_sbm, fast_attack):
        graph, split = small_sbm
        only_zero = split.train[graph.sensitive[split.train] == 0]
        with pytest.raises(AttackAbortedError, match="group 1"):
            run_attack(graph, split.replace(train=only_zero), fast_attack)

    def test_non_finite_loss_aborts_with_last_state(self, small_sbm, fast_attack):
        graph, split = small_sbm
        with pytest.raises(AttackAbortedError) as info:
            run_attack(graph, split, replace(fast_attack, lr_surrogate=1e308, bayes_epochs=0),
                       AttackVariant.RANDOM_TARGETS)
        assert info.value.plan is not None
        assert info.value.iteration == 0

    def test_diverging_pretraining_aborts(self, small_sbm, fast_attack):
        graph, split = small_sbm
        with pytest.raises(AttackAbortedError, match="pretraining") as info:
            run_attack(graph, split, replace(fast_attack, lr_surrogate=1e308),
                       AttackVariant.RANDOM_TARGETS)
        assert info.value.plan is not None
        assert info.value.iteration is None

    def test_surrogate_starts_pretrained(self, small_sbm, fast_attack):
        graph, split = small_sbm
        result = run_attack(graph, split, replace(fast_attack, max_iter=0))
        assert params_to_bytes(result.surrogate) == params_to_bytes(
            pretrained_surrogate(graph, split, fast_attack))

    def test_first_feature_step_moves_each_entry_by_at_most_lr(self, small_sbm, fast_attack):
        graph, split = small_sbm
        cfg = replace(fast_attack, max_iter=1, max_step=1, lr_feature=1e-3)
        result = run_attack(graph, split, cfg)
        initial = init_features(result.plan, graph, "uniform",
                                derive_rng(cfg.seed, "init-features"), 0.01)
        moved = np.abs(result.plan.features - initial)
        assert moved.max() <= 1e-3 + 1e-12
        assert np.median(moved) > 0.9e-3


class TestAblations:
    def test_random_targets_skip_uncertainty(self, small_sbm, fast_attack, monkeypatch):
        def forbidden(*args, **kwargs):
            raise AssertionError("uncertainty must not be computed")

        monkeypatch.setattr(uncertainty, "train_bayesian", forbidden)
        monkeypatch.setattr(uncertainty, "estimate_uncertainty", forbidden)
        graph, split = small_sbm
        result = run_ablation(graph, split, fast_attack, "random-targets")
        assert result.bayesian is None and result.report is None
        assert validate_poisoned(graph, result.poisoned, result.plan) == []

    def test_mixed_groups_plan(self, small_sbm, fast_attack):
        graph, split = small_sbm
        result = run_ablation(graph, split, fast_attack, "h")
        assert not result.plan.same_group
        targets = result.plan.targets
        assert np.isin(result.plan.edges[:, 1], targets).all()

    def test_frozen_surrogate_is_pretrained_and_untouched(self, small_sbm, fast_attack):
        graph, split = small_sbm
        result = run_ablation(graph, split, fast_attack, AttackVariant.FROZEN_SURROGATE)
        assert {row[2] for row in result.log.rows} == {"feature"}

        pretrained = pretrained_surrogate(graph, split, fast_attack)
        assert params_to_bytes(result.surrogate) == params_to_bytes(pretrained)

    def test_full_variant_rejected(self, small_sbm, fast_attack):
        graph, split = small_sbm
        with pytest.raises(ValueError, match="ablated"):
            run_ablation(graph, split, fast_attack, "full")


def test_random_configurations_produce_valid_graphs(small_sbm):
    graph, split = small_sbm
    rng = np.random.default_rng(2024)
    variants = list(AttackVariant)
    for trial in range(20):
        cfg = AttackConfig(
            node_budget=int(rng.integers(1, 9)),
            degree_budget=int(rng.integers(1, 6)),
            k_percent=float(rng.choice([0.1, 0.25, 0.5, 1.0])),
            max_iter=1, max_step=2, samples=2, bayes_epochs=2, hidden=4,
            lr_feature=float(rng.choice([0.01, 1.0, 100.0])),
            discrete_features=bool(rng.integers(0, 2)),
            seed=trial,
        )
        variant = variants[trial % len(variants)]
        result = run_attack(graph, split, cfg, variant)
        problems = validate_poisoned(graph, result.poisoned, result.plan,
                                     discrete=cfg.discrete_features)
        assert problems == [], (trial, variant, problems)
        assert result.plan.num_injected == cfg.node_budget
