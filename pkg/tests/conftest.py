"""
Shared fixtures: hand-sized graphs, the 12-node gradient instance, a small
synthetic benchmark and the bundled toy graph directory.
"""

from pathlib import Path

import numpy as np
import pytest

from fairforge.attack.config import AttackConfig
from fairforge.graph.generator import generate_sbm
from fairforge.graph.graph import Graph, InjectionPlan, Split, apply_plan


FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def toy_dir() -> Path:
    return FIXTURES / "toy"


@pytest.fixture
def four_nodes() -> Graph:
    """Path 0-1-2-3; groups (0, 1, 0, 1); all labeled."""
    return Graph.from_edges(
        4, [(0, 1), (1, 2), (2, 3)],
        features=np.arange(8, dtype=np.float64).reshape(4, 2),
        labels=[0, 1, 0, 1],
        sensitive=[0, 1, 0, 1],
    )


@pytest.fixture
def star5() -> Graph:
    """Star with centre 0 and five leaves."""
    return Graph.from_edges(6, [(0, i) for i in range(1, 6)], features=np.zeros((6, 1)))


def random_graph(n: int, p: float, num_features: int, seed: int, num_classes: int = 2) -> Graph:
    rng = np.random.default_rng(seed)
    upper = np.triu(rng.random((n, n)) < p, k=1)
    edges = np.argwhere(upper)
    # ring keeps every node connected
    ring = np.column_stack([np.arange(n), (np.arange(n) + 1) % n])
    return Graph.from_edges(
        n, np.vstack([edges, ring]),
        features=rng.normal(size=(n, num_features)),
        labels=np.arange(n) % num_classes,
        sensitive=(np.arange(n) // 2) % 2,
    )


@pytest.fixture
def grad_instance():
    """
    12 nodes (10 real + 2 injected), 5 features, 2 classes; returns
    (poisoned graph, train indices, injected rows, plan).
    """
    clean = random_graph(10, 0.3, 5, seed=7)
    plan = InjectionPlan(
        targets_by_group=([0, 1, 4], [2, 3, 6]),
        groups=[0, 1],
        edges=[(0, 0), (0, 4), (1, 3), (1, 6)],
        features=np.random.default_rng(3).normal(size=(2, 5)),
        node_budget=2,
        degree_budget=2,
    )
    poisoned = apply_plan(clean, plan)
    train = np.arange(8)
    rows = np.arange(10, 12)
    return poisoned, train, rows, plan


@pytest.fixture(scope="session")
def small_sbm():
    """120-node biased SBM with its 50/25/25 split."""
    return generate_sbm(n=120, num_classes=2, num_features=6, p_in=0.08, p_out=0.01,
                        bias=0.3, feature_sep=1.5, seed=0)


@pytest.fixture
def fast_attack() -> AttackConfig:
    """Attack settings small enough for unit tests."""
    return AttackConfig(node_budget=4, degree_budget=3, max_iter=2, max_step=3, samples=3,
                        bayes_epochs=5, hidden=8, lr_feature=0.05, seed=0)


@pytest.fixture
def toy_split() -> Split:
    return Split(train=[0, 1, 4, 6, 8, 9], val=[2, 5, 10], test=[3, 7, 11])
