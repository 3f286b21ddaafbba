"""
FairForge Graph Core
====================
Immutable attributed graph with a binary sensitive attribute, the injection
plan that poisons it, and node-level homophily arithmetic.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from fairforge.utils.logger import get_logger


logger = get_logger("Graph")

UNLABELED = -1


class GraphError(ValueError):
    """Raised when a graph or plan is structurally invalid."""


class PlanViolationError(GraphError):
    """Raised when an injection plan breaks one of its invariants."""

    def __init__(self, message: str, violations: List[str]):
        self.violations = list(violations)
        detail = "; ".join(self.violations[:10])
        if len(self.violations) > 10:
            detail += f"; ... ({len(self.violations) - 10} more)"
        super().__init__(f"{message}: {detail}")


class UndefinedHomophilyError(GraphError):
    """Raised when the homophily ratio of an isolated node is requested."""


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, copy=True)
    array.setflags(write=False)
    return array


def symmetrize(adjacency: sp.spmatrix) -> sp.csr_matrix:
    """Binary, symmetric, loop-free CSR copy of an adjacency matrix."""
    adjacency = sp.csr_matrix(adjacency, dtype=np.float64)
    adjacency = adjacency + adjacency.T
    adjacency.setdiag(0)
    adjacency.eliminate_zeros()
    adjacency.data[:] = 1.0
    adjacency.sort_indices()
    return adjacency


def adjacency_from_edges(num_nodes: int, edges: np.ndarray) -> sp.csr_matrix:
    """Undirected adjacency from an (m, 2) edge array; duplicates and self-loops dropped."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if edges.size and (edges.min() < 0 or edges.max() >= num_nodes):
        raise GraphError(f"edge endpoint out of range [0, {num_nodes})")
    matrix = sp.coo_matrix(
        (np.ones(len(edges)), (edges[:, 0], edges[:, 1])), shape=(num_nodes, num_nodes)
    )
    return symmetrize(matrix)


@dataclass(frozen=True, eq=False)
class Graph:
    """
    Undirected attributed graph.

    Attributes:
        adjacency: Symmetric binary CSR matrix without self-loops
        features: Dense float64 matrix, one row per node
        labels: Class index per node, UNLABELED (-1) where absent
        sensitive: Binary sensitive attribute per node
        injected: True for nodes added by an injection plan
    """

    adjacency: sp.csr_matrix
    features: np.ndarray
    labels: np.ndarray
    sensitive: np.ndarray
    injected: np.ndarray

    def __post_init__(self):
        adjacency = sp.csr_matrix(self.adjacency, dtype=np.float64)
        adjacency.sort_indices()
        features = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        sensitive = np.asarray(self.sensitive, dtype=np.int64)
        injected = np.asarray(self.injected, dtype=bool)

        n = adjacency.shape[0]
        errors = []
        if adjacency.shape != (n, n):
            errors.append(f"adjacency must be square, got {adjacency.shape}")
        if features.ndim != 2 or features.shape[0] != n:
            errors.append(f"features must have {n} rows, got shape {features.shape}")
        for name, arr in (("labels", labels), ("sensitive", sensitive), ("injected", injected)):
            if arr.shape != (n,):
                errors.append(f"{name} must have shape ({n},), got {arr.shape}")
        if not errors:
            if adjacency.diagonal().any():
                errors.append("adjacency stores self-loops")
            if (adjacency != adjacency.T).nnz:
                errors.append("adjacency is not symmetric")
            if not np.isin(sensitive, (0, 1)).all():
                errors.append("sensitive attribute must be binary")
            if (labels < UNLABELED).any():
                errors.append("labels must be >= 0 or UNLABELED")
        if errors:
            raise GraphError("; ".join(errors))

        adjacency.data.setflags(write=False)
        adjacency.indices.setflags(write=False)
        adjacency.indptr.setflags(write=False)
        object.__setattr__(self, "adjacency", adjacency)
        object.__setattr__(self, "features", _frozen(features))
        object.__setattr__(self, "labels", _frozen(labels))
        object.__setattr__(self, "sensitive", _frozen(sensitive))
        object.__setattr__(self, "injected", _frozen(injected))

    @classmethod
    def from_edges(cls, num_nodes: int, edges, features, labels=None,
                   sensitive=None, injected=None) -> 'Graph':
        """Build a graph from an edge list (treated as undirected)."""
        labels = np.full(num_nodes, UNLABELED) if labels is None else labels
        sensitive = np.zeros(num_nodes, dtype=np.int64) if sensitive is None else sensitive
        injected = np.zeros(num_nodes, dtype=bool) if injected is None else injected
        return cls(adjacency_from_edges(num_nodes, edges), features, labels, sensitive, injected)

    @property
    def num_nodes(self) -> int:
        return self.adjacency.shape[0]

    @property
    def num_features(self) -> int:
        return self.features.shape[1]

    @property
    def num_edges(self) -> int:
        """Number of undirected edges."""
        return self.adjacency.nnz // 2

    @property
    def num_classes(self) -> int:
        labeled = self.labels[self.labels >= 0]
        return int(labeled.max()) + 1 if labeled.size else 0

    @property
    def num_original(self) -> int:
        return int((~self.injected).sum())

    def degrees(self) -> np.ndarray:
        return np.diff(self.adjacency.indptr)

    def neighbors(self, node: int) -> np.ndarray:
        self._check_node(node)
        start, stop = self.adjacency.indptr[node], self.adjacency.indptr[node + 1]
        return self.adjacency.indices[start:stop]

    def labeled_nodes(self) -> np.ndarray:
        return np.flatnonzero((self.labels >= 0) & ~self.injected)

    def edge_array(self) -> np.ndarray:
        """Undirected edges as an (m, 2) array with u < v, sorted."""
        upper = sp.triu(self.adjacency, k=1).tocoo()
        edges = np.column_stack([upper.row, upper.col]).astype(np.int64)
        order = np.lexsort((edges[:, 1], edges[:, 0]))
        return edges[order]

    def feature_bounds(self) -> Tuple[np.ndarray, np.ndarray]:
        """Per-column (min, max) over the original (non-injected) rows."""
        original = self.features[~self.injected]
        return original.min(axis=0), original.max(axis=0)

    def _check_node(self, node: int):
        if not 0 <= int(node) < self.num_nodes:
            raise GraphError(f"node {node} out of range [0, {self.num_nodes})")

    def equals(self, other: 'Graph') -> bool:
        """Exact structural and attribute equality."""
        return (
            self.adjacency.shape == other.adjacency.shape
            and (self.adjacency != other.adjacency).nnz == 0
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.sensitive, other.sensitive)
            and np.array_equal(self.injected, other.injected)
        )


@dataclass(frozen=True, eq=False)
class Split:
    """Disjoint train/val/test index sets over labeled original nodes."""

    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    def __post_init__(self):
        parts = {}
        for name in ("train", "val", "test"):
            parts[name] = _frozen(np.unique(np.asarray(getattr(self, name), dtype=np.int64)))
            object.__setattr__(self, name, parts[name])
        union = np.concatenate(list(parts.values()))
        if len(np.unique(union)) != len(union):
            raise GraphError("train/val/test splits overlap")

    def validate_against(self, graph: Graph):
        """Raise if any split index is unlabeled, injected or out of range."""
        union = np.concatenate([self.train, self.val, self.test])
        if union.size and (union.min() < 0 or union.max() >= graph.num_nodes):
            raise GraphError("split index out of range")
        bad = union[(graph.labels[union] < 0) | graph.injected[union]]
        if bad.size:
            raise GraphError(f"split contains unlabeled or injected nodes: {bad[:10].tolist()}")

    def replace(self, **parts) -> 'Split':
        values = {"train": self.train, "val": self.val, "test": self.test}
        values.update(parts)
        return Split(**values)

    def to_dict(self) -> Dict[str, List[int]]:
        return {name: getattr(self, name).tolist() for name in ("train", "val", "test")}

    @classmethod
    def from_dict(cls, data: Dict[str, Sequence[int]]) -> 'Split':
        return cls(train=data["train"], val=data["val"], test=data["test"])


@dataclass(frozen=True, eq=False)
class InjectionPlan:
    """
    The attack's delta against a clean graph.

    Attributes:
        targets_by_group: Real target nodes per sensitive group (group 0, group 1)
        groups: Assigned sensitive group of each injected node
        edges: (m, 2) array of (injected local index, real target index)
        features: Injected feature matrix, one row per injected node
        node_budget: The b the plan was built under (None when unknown)
        degree_budget: The d the plan was built under (None when unknown)
        seed: Seed the plan was drawn with
        same_group: Whether edges must stay inside the injected node's group
    """

    targets_by_group: Tuple[np.ndarray, np.ndarray]
    groups: np.ndarray
    edges: np.ndarray
    features: np.ndarray
    node_budget: Optional[int] = None
    degree_budget: Optional[int] = None
    seed: Optional[int] = None
    same_group: bool = True
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        targets = tuple(_frozen(np.unique(np.asarray(t, dtype=np.int64)))
                        for t in self.targets_by_group)
        if len(targets) != 2:
            raise GraphError("targets_by_group must hold exactly two index sets")
        groups = _frozen(np.asarray(self.groups, dtype=np.int64).reshape(-1))
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        features = np.asarray(self.features, dtype=np.float64)
        if features.ndim != 2 or features.shape[0] != len(groups):
            if not (features.size == 0 and len(groups) == 0):
                raise GraphError(
                    f"injected features must have {len(groups)} rows, got {features.shape}"
                )
        object.__setattr__(self, "targets_by_group", targets)
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "edges", _frozen(edges))
        object.__setattr__(self, "features", _frozen(features))

    @classmethod
    def empty(cls, num_features: int) -> 'InjectionPlan':
        return cls(
            targets_by_group=(np.empty(0), np.empty(0)),
            groups=np.empty(0),
            edges=np.empty((0, 2)),
            features=np.empty((0, num_features)),
        )

    @property
    def num_injected(self) -> int:
        return len(self.groups)

    @property
    def injected_count_by_group(self) -> Tuple[int, int]:
        return int((self.groups == 0).sum()), int((self.groups == 1).sum())

    @property
    def targets(self) -> np.ndarray:
        return np.union1d(*self.targets_by_group)

    def injected_degrees(self) -> np.ndarray:
        return np.bincount(self.edges[:, 0], minlength=self.num_injected) if self.num_injected \
            else np.empty(0, dtype=np.int64)

    def with_features(self, features: np.ndarray) -> 'InjectionPlan':
        return InjectionPlan(
            targets_by_group=self.targets_by_group,
            groups=self.groups,
            edges=self.edges,
            features=features,
            node_budget=self.node_budget,
            degree_budget=self.degree_budget,
            seed=self.seed,
            same_group=self.same_group,
            metadata=dict(self.metadata),
        )

    def violations(self, clean: Graph) -> List[str]:
        """Every invariant this plan breaks against a clean graph."""
        problems = []
        n = clean.num_nodes
        if not np.isin(self.groups, (0, 1)).all():
            problems.append("injected group assignment must be binary")
        for group, targets in enumerate(self.targets_by_group):
            if targets.size and (targets.min() < 0 or targets.max() >= n):
                problems.append(f"group-{group} target index out of range [0, {n})")
            elif targets.size and (clean.sensitive[targets] != group).any():
                problems.append(f"group-{group} target set contains nodes of the other group")
        if self.features.size and self.features.shape[1] != clean.num_features:
            problems.append(
                f"injected features have {self.features.shape[1]} columns, "
                f"graph has {clean.num_features}"
            )
        if self.node_budget is not None and self.num_injected > self.node_budget:
            problems.append(
                f"{self.num_injected} injected nodes exceed budget b={self.node_budget}"
            )
        if not self.edges.size:
            return problems

        local, target = self.edges[:, 0], self.edges[:, 1]
        bad_local = (local < 0) | (local >= self.num_injected)
        bad_target = (target < 0) | (target >= n)
        for u, v in self.edges[bad_local | bad_target]:
            problems.append(f"edge ({u}, {v}) index out of range")
        if problems:
            return problems

        if clean.injected[target].any():
            problems.append("edges must end at real (non-injected) nodes")
        keys = local * n + target
        if len(np.unique(keys)) != len(keys):
            problems.append("duplicate injected edge")
        if self.same_group:
            mismatch = clean.sensitive[target] != self.groups[local]
            for u, v in self.edges[mismatch]:
                problems.append(
                    f"edge (injected {u}, target {v}) joins group {self.groups[u]} "
                    f"to a node of group {clean.sensitive[v]}"
                )
        if self.degree_budget is not None:
            degrees = self.injected_degrees()
            for u in np.flatnonzero(degrees > self.degree_budget):
                problems.append(
                    f"injected node {u} has degree {degrees[u]} > d={self.degree_budget}"
                )
        return problems

    def to_dict(self) -> Dict[str, Any]:
        """JSON sidecar describing the plan (features are stored in the graph files)."""
        return {
            "targets_by_group": [t.tolist() for t in self.targets_by_group],
            "groups": self.groups.tolist(),
            "edges": self.edges.tolist(),
            "node_budget": self.node_budget,
            "degree_budget": self.degree_budget,
            "seed": self.seed,
            "same_group": self.same_group,
            "num_injected": self.num_injected,
            "injected_count_by_group": list(self.injected_count_by_group),
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any], features: np.ndarray) -> 'InjectionPlan':
        return cls(
            targets_by_group=tuple(np.asarray(t) for t in data["targets_by_group"]),
            groups=np.asarray(data["groups"]),
            edges=np.asarray(data["edges"]).reshape(-1, 2),
            features=features,
            node_budget=data.get("node_budget"),
            degree_budget=data.get("degree_budget"),
            seed=data.get("seed"),
            same_group=data.get("same_group", True),
            metadata=data.get("metadata", {}),
        )


def apply_plan(clean: Graph, plan: InjectionPlan) -> Graph:
    """
    Compose the poisoned graph: clean nodes keep their ids, rows and edges;
    injected nodes are appended after them, unlabeled, carrying their group.

    Raises:
        PlanViolationError: listing every invariant the plan breaks
    """
    problems = plan.violations(clean)
    if problems:
        raise PlanViolationError("injection plan rejected", problems)

    n, n_injected = clean.num_nodes, plan.num_injected
    if n_injected == 0:
        return clean

    bridge = sp.csr_matrix(
        (np.ones(len(plan.edges)), (plan.edges[:, 1], plan.edges[:, 0])),
        shape=(n, n_injected),
    )
    adjacency = sp.bmat([[clean.adjacency, bridge], [bridge.T, None]], format="csr")

    poisoned = Graph(
        adjacency=adjacency,
        features=np.vstack([clean.features, plan.features]),
        labels=np.concatenate([clean.labels, np.full(n_injected, UNLABELED)]),
        sensitive=np.concatenate([clean.sensitive, plan.groups]),
        injected=np.concatenate([clean.injected, np.ones(n_injected, dtype=bool)]),
    )
    logger.debug(
        f"Applied plan: {n_injected} injected nodes, {len(plan.edges)} edges "
        f"({clean.num_nodes} -> {poisoned.num_nodes} nodes)"
    )
    return poisoned


def perturbation_rate(clean: Graph, plan: InjectionPlan) -> float:
    """Injected nodes per labeled node of the clean graph."""
    labeled = len(clean.labeled_nodes())
    return plan.num_injected / labeled if labeled else float("inf")


def node_homophily(graph: Graph, node: int) -> float:
    """Fraction of the node's neighbors sharing its sensitive attribute."""
    neighbors = graph.neighbors(node)
    if neighbors.size == 0:
        raise UndefinedHomophilyError(f"node {node} is isolated; homophily is undefined")
    same = graph.sensitive[neighbors] == graph.sensitive[node]
    return float(same.sum() / neighbors.size)


@dataclass(frozen=True)
class HomophilyChange:
    """Homophily of one node before and after injection."""

    node: int
    before: float
    after: float
    same_neighbors: int
    degree: int
    injected_edges: int

    @property
    def predicted_after(self) -> float:
        """(k + n_u) / (|N_u| + n_u) from the clean counts."""
        total = self.degree + self.injected_edges
        if total == 0:
            return float("nan")
        return (self.same_neighbors + self.injected_edges) / total


def homophily_delta_report(clean: Graph, poisoned: Graph,
                           targets: Sequence[int]) -> List[HomophilyChange]:
    """
    Per-node homophily before and after injection.

    Isolated clean nodes report ``before = nan``. For nodes touched by a
    same-group plan the measured ratio must equal the closed form
    (k + n_u) / (|N_u| + n_u) and must not decrease.
    """
    report = []
    for node in np.asarray(targets, dtype=np.int64):
        clean._check_node(node)
        neighbors = clean.neighbors(node)
        after_neighbors = poisoned.neighbors(node)
        same = int((clean.sensitive[neighbors] == clean.sensitive[node]).sum())
        injected_edges = int(poisoned.injected[after_neighbors].sum())
        before = same / neighbors.size if neighbors.size else float("nan")
        after = node_homophily(poisoned, node) if after_neighbors.size else float("nan")
        change = HomophilyChange(
            node=int(node),
            before=before,
            after=after,
            same_neighbors=same,
            degree=int(neighbors.size),
            injected_edges=injected_edges,
        )
        injected_same = poisoned.sensitive[after_neighbors[poisoned.injected[after_neighbors]]]
        if (injected_same == clean.sensitive[node]).all() and after_neighbors.size:
            if not np.isclose(change.after, change.predicted_after, rtol=0, atol=1e-12):
                raise GraphError(f"node {node}: measured homophily disagrees with closed form")
            if neighbors.size and change.after < change.before:
                raise GraphError(f"node {node}: homophily decreased after same-group injection")
        report.append(change)
    return report
