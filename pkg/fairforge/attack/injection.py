"""
Injection plan construction and injected-feature initialization.
"""

from typing import Optional, Sequence, Tuple

import numpy as np

from fairforge.attack.config import InitStrategy
from fairforge.graph.graph import Graph, GraphError, InjectionPlan
from fairforge.utils.logger import get_logger


logger = get_logger("Injection")


def split_budget(node_budget: int) -> Tuple[int, int]:
    """ceil(b/2) injected nodes for group 0, floor(b/2) for group 1."""
    return (node_budget + 1) // 2, node_budget // 2


def build_plan(targets_by_group: Sequence[np.ndarray], node_budget: int, degree_budget: int,
               rng: np.random.Generator, *, mixed: bool = False,
               num_features: int = 0, seed: Optional[int] = None) -> InjectionPlan:
    """
    Assign injected nodes to groups and wire each one to min(d, pool) targets
    sampled without replacement from its own group's target set.

    With ``mixed=True`` every injected node draws from the union of both
    target sets and the plan is marked as not same-group. If one group has
    no targets its share moves to the other group.

    Raises:
        GraphError: invalid budgets or both target sets empty
    """
    if node_budget < 1 or degree_budget < 1:
        raise GraphError(f"budgets must be >= 1, got b={node_budget}, d={degree_budget}")
    pools = [np.unique(np.asarray(t, dtype=np.int64)) for t in targets_by_group]
    if pools[0].size == 0 and pools[1].size == 0:
        raise GraphError("both target sets are empty")

    counts = list(split_budget(node_budget))
    for group in (0, 1):
        if pools[group].size == 0 and counts[group]:
            logger.warning(
                f"group {group} has no targets; its {counts[group]} injected nodes "
                f"go to group {1 - group}"
            )
            counts[1 - group] += counts[group]
            counts[group] = 0

    union = np.union1d(pools[0], pools[1])
    groups = np.concatenate([np.zeros(counts[0], dtype=np.int64),
                             np.ones(counts[1], dtype=np.int64)])
    edges = []
    for local, group in enumerate(groups):
        pool = union if mixed else pools[group]
        chosen = np.sort(rng.choice(pool, size=min(degree_budget, pool.size), replace=False))
        edges.extend((local, int(target)) for target in chosen)

    plan = InjectionPlan(
        targets_by_group=tuple(pools),
        groups=groups,
        edges=np.array(edges, dtype=np.int64).reshape(-1, 2),
        features=np.zeros((len(groups), num_features)),
        node_budget=node_budget,
        degree_budget=degree_budget,
        seed=seed,
        same_group=not mixed,
    )
    logger.debug(
        f"Built plan: {plan.num_injected} nodes {plan.injected_count_by_group}, "
        f"{len(plan.edges)} edges"
    )
    return plan


def random_targets(graph: Graph, candidates: Sequence[int], counts: Tuple[int, int],
                   rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """Uniformly sampled targets per group, ``counts[g]`` of them from group g's candidates."""
    candidates = np.unique(np.asarray(candidates, dtype=np.int64))
    chosen = []
    for group in (0, 1):
        pool = candidates[graph.sensitive[candidates] == group]
        size = min(counts[group], pool.size)
        chosen.append(np.sort(rng.choice(pool, size=size, replace=False)))
    return chosen[0], chosen[1]


def clamp_features(features: np.ndarray, clean: Graph) -> np.ndarray:
    """Clip every column to the [min, max] of the clean graph's column."""
    low, high = clean.feature_bounds()
    return np.clip(features, low, high)


def integer_columns(clean: Graph) -> np.ndarray:
    """Columns whose clean [min, max] contains at least one integer."""
    low, high = clean.feature_bounds()
    return np.ceil(low) <= np.floor(high)


def round_features(features: np.ndarray, clean: Graph) -> np.ndarray:
    """
    Nearest integers inside the clean column bounds. Columns without an
    integer in their bounds keep their clamped values.
    """
    features = clamp_features(features, clean)
    low, high = clean.feature_bounds()
    columns = integer_columns(clean)
    if not columns.all():
        logger.warning(f"{int((~columns).sum())} feature columns hold no integer, left unrounded")
    rounded = np.clip(np.rint(features), np.ceil(low), np.floor(high))
    return np.where(columns, rounded, features)


def init_features(plan: InjectionPlan, clean: Graph, strategy="uniform",
                  rng: Optional[np.random.Generator] = None, noise: float = 0.01) -> np.ndarray:
    """
    Initial injected feature matrix inside the clean per-column bounds.

    ``uniform`` draws each column from U[min, max]; ``target_mean`` uses the
    mean of the node's targets plus Gaussian noise of scale noise * range.

    Raises:
        ValueError: unknown strategy
    """
    strategy = InitStrategy(strategy)
    rng = np.random.default_rng(0) if rng is None else rng
    low, high = clean.feature_bounds()
    span = high - low
    shape = (plan.num_injected, clean.num_features)

    if strategy is InitStrategy.UNIFORM:
        return low + span * rng.random(shape)

    features = np.empty(shape)
    for local in range(plan.num_injected):
        targets = plan.edges[plan.edges[:, 0] == local, 1]
        features[local] = clean.features[targets].mean(axis=0)
    features += rng.standard_normal(shape) * (noise * span)
    return np.clip(features, low, high)
