"""
Independent checks of an emitted poisoned graph against its clean source.
"""

from typing import List, Optional

import numpy as np

from fairforge.attack.injection import integer_columns
from fairforge.graph.graph import Graph, InjectionPlan


def validate_poisoned(clean: Graph, poisoned: Graph, plan: Optional[InjectionPlan] = None,
                      node_budget: Optional[int] = None, degree_budget: Optional[int] = None,
                      discrete: bool = False) -> List[str]:
    """
    Every budget, clamp and composition rule the poisoned graph breaks.

    Checks are made on the graph itself, not on the plan's bookkeeping; the
    plan only contributes its budgets when none are passed explicitly.
    """
    problems = []
    n = clean.num_nodes
    if node_budget is None and plan is not None:
        node_budget = plan.node_budget
    if degree_budget is None and plan is not None:
        degree_budget = plan.degree_budget

    if poisoned.num_nodes < n:
        return [f"poisoned graph has {poisoned.num_nodes} nodes, fewer than clean {n}"]
    injected = np.arange(n, poisoned.num_nodes)
    if node_budget is not None and injected.size > node_budget:
        problems.append(f"{injected.size} injected nodes exceed b={node_budget}")
    if not poisoned.injected[injected].all() or poisoned.injected[:n].any():
        problems.append("injected flags do not mark exactly the appended nodes")
    if (poisoned.labels[injected] >= 0).any():
        problems.append("injected nodes carry labels")

    original = poisoned.adjacency[:n][:, :n]
    if (original != clean.adjacency).nnz:
        problems.append("original adjacency entries changed")
    if not np.array_equal(poisoned.features[:n], clean.features):
        problems.append("original feature rows changed")
    if not (np.array_equal(poisoned.labels[:n], clean.labels)
            and np.array_equal(poisoned.sensitive[:n], clean.sensitive)):
        problems.append("original labels or sensitive attributes changed")

    if injected.size:
        among = poisoned.adjacency[injected][:, injected]
        if among.nnz:
            problems.append(f"{among.nnz // 2} edges between injected nodes")
        degrees = poisoned.degrees()[injected]
        if degree_budget is not None and (degrees > degree_budget).any():
            worst = int(degrees.max())
            problems.append(f"injected degree {worst} exceeds d={degree_budget}")

        values = poisoned.features[injected]
        low, high = clean.feature_bounds()
        outside = (values < low) | (values > high)
        if outside.any():
            problems.append(f"{int(outside.sum())} injected feature values outside clean bounds")
        columns = integer_columns(clean)
        if discrete and not np.array_equal(values[:, columns], np.rint(values[:, columns])):
            problems.append("injected features are not integer-valued")
    return problems
