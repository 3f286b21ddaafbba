"""
FairForge Synthetic Graphs
==========================
Stochastic block model over sensitive groups with a dialled class/group bias.
"""

from dataclasses import asdict, dataclass
from typing import Any, Dict, Tuple

import networkx as nx
import numpy as np

from fairforge.graph.graph import Graph, GraphError, Split, adjacency_from_edges
from fairforge.graph.splits import DEFAULT_RATIOS, make_split
from fairforge.utils.logger import get_logger
from fairforge.utils.rng import derive_rng, derive_seed


logger = get_logger("Generator")


@dataclass(frozen=True)
class SBMConfig:
    """Parameters of the biased stochastic block model."""

    n: int = 600
    num_classes: int = 2
    num_features: int = 16
    p_in: float = 0.03
    p_out: float = 0.005
    bias: float = 0.3
    feature_sep: float = 1.0
    sensitive_signal: float = 0.5
    seed: int = 0

    def validate(self):
        errors = []
        if self.n < 50:
            errors.append(f"n must be >= 50, got {self.n}")
        if self.num_classes < 2:
            errors.append("num_classes must be >= 2")
        if self.num_features < 2:
            errors.append("num_features must be >= 2")
        if not 0 <= self.p_out <= self.p_in <= 1:
            errors.append(f"need 0 <= p_out <= p_in <= 1, got p_in={self.p_in}, p_out={self.p_out}")
        if not 0 <= self.bias <= 1:
            errors.append(f"bias must lie in [0, 1], got {self.bias}")
        if errors:
            raise GraphError("; ".join(errors))

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def class_probabilities(num_classes: int, bias: float, group: int) -> np.ndarray:
    """P(y | s): uniform mixed with a point mass on class ``group mod C``."""
    probs = np.full(num_classes, (1.0 - bias) / num_classes)
    probs[group % num_classes] += bias
    return probs


def generate_sbm(n: int = 600, num_classes: int = 2, num_features: int = 16,
                 p_in: float = 0.03, p_out: float = 0.005, bias: float = 0.3,
                 feature_sep: float = 1.0, seed: int = 0,
                 sensitive_signal: float = 0.5,
                 ratios=DEFAULT_RATIOS) -> Tuple[Graph, Split]:
    """
    Sample a biased attributed SBM.

    Groups are balanced; edges follow an SBM over the two sensitive groups
    (p_in inside a group, p_out across); classes are drawn from P(y | s) so
    that ``bias`` dials the clean graph's unfairness; features are the class
    mean (``feature_sep`` on the class's coordinate) plus unit Gaussian
    noise, and the last column is shifted by ``sensitive_signal * s``.
    """
    config = SBMConfig(n, num_classes, num_features, p_in, p_out, bias,
                       feature_sep, sensitive_signal, seed)
    config.validate()

    sizes = [n // 2, n - n // 2]
    block_graph = nx.stochastic_block_model(
        sizes, [[p_in, p_out], [p_out, p_in]], seed=derive_seed(seed, "sbm-edges")
    )
    # networkx numbers blocks contiguously; shuffle so ids carry no group information
    relabel = derive_rng(seed, "sbm-ids").permutation(n)
    block_sensitive = np.repeat([0, 1], sizes)
    sensitive = np.empty(n, dtype=np.int64)
    sensitive[relabel] = block_sensitive
    edges = np.array([(relabel[u], relabel[v]) for u, v in block_graph.edges()],
                     dtype=np.int64).reshape(-1, 2)

    label_rng = derive_rng(seed, "sbm-labels")
    labels = np.empty(n, dtype=np.int64)
    for group in (0, 1):
        members = np.flatnonzero(sensitive == group)
        labels[members] = label_rng.choice(
            num_classes, size=len(members), p=class_probabilities(num_classes, bias, group)
        )

    feature_rng = derive_rng(seed, "sbm-features")
    means = np.zeros((num_classes, num_features))
    means[np.arange(num_classes), np.arange(num_classes) % (num_features - 1)] = feature_sep
    features = means[labels] + feature_rng.standard_normal((n, num_features))
    features[:, -1] += sensitive_signal * sensitive

    graph = Graph(
        adjacency=adjacency_from_edges(n, edges),
        features=features,
        labels=labels,
        sensitive=sensitive,
        injected=np.zeros(n, dtype=bool),
    )
    split = make_split(graph, ratios, seed=seed)
    logger.info(
        f"Generated SBM: {n} nodes, {graph.num_edges} edges, "
        f"avg degree {graph.degrees().mean():.2f}, bias={bias}"
    )
    return graph, split
