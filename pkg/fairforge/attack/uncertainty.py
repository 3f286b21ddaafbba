"""
FairForge Uncertainty
=====================
Bayesian GCN trained with Monte Carlo weight dropout, per-node predictive
uncertainty, and uncertainty-ranked target selection.

Masks keep each weight with probability ``keep_prob``. The training
objective for T masks is

    (1/T) * sum_i CE(theta * M_i) + ((1 - p) / (2T)) * ||theta||^2

and the uncertainty of a node is the sum over classes of the (1/T)
variance of its softmax probabilities across T stochastic passes.
"""

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp

from fairforge.graph.graph import Graph, Split
from fairforge.models.gcn import (
    ModelKind,
    ModelParams,
    WeightMasks,
    backward,
    init_params,
    normalize_adjacency,
    predict_proba,
)
from fairforge.models.losses import LossSpec
from fairforge.models.training import GradientFn, train
from fairforge.utils.logger import get_logger
from fairforge.utils.rng import derive_rng, derive_seed


logger = get_logger("Uncertainty")


class UncertaintyError(ValueError):
    """Raised for invalid keep-probabilities, sample counts or empty candidate groups."""


def _check_keep_prob(keep_prob: float):
    if not 0 < keep_prob <= 1:
        raise UncertaintyError(f"keep probability must be in (0, 1], got {keep_prob}")


def _check_samples(samples: int):
    if samples < 1:
        raise UncertaintyError(f"sample count must be >= 1, got {samples}")


def sample_masks(params: ModelParams, keep_prob: float,
                 rng: np.random.Generator) -> WeightMasks:
    """Independent Bernoulli(keep_prob) masks shaped like w1 (and w2)."""
    _check_keep_prob(keep_prob)
    if keep_prob == 1.0:
        return WeightMasks.ones(params)
    m1 = (rng.random(params.w1.shape) < keep_prob).astype(np.float64)
    m2 = None
    if params.w2 is not None:
        m2 = (rng.random(params.w2.shape) < keep_prob).astype(np.float64)
    return WeightMasks(m1, m2)


def bayesian_gradient_fn(graph: Graph, split: Split, samples: int, keep_prob: float,
                         adj: Optional[sp.spmatrix] = None) -> GradientFn:
    """
    Objective and gradient of the Monte Carlo dropout loss; fresh masks are
    drawn from the supplied stream on every call.
    """
    _check_samples(samples)
    _check_keep_prob(keep_prob)
    adj = normalize_adjacency(graph) if adj is None else adj
    spec = LossSpec.cross_entropy(graph.labels, split.train)
    reg = (1.0 - keep_prob) / (2.0 * samples)

    def objective(params: ModelParams, rng: np.random.Generator):
        loss = 0.0
        grads = {name: np.zeros_like(arr) for name, arr in params.arrays().items()}
        for _ in range(samples):
            masks = sample_masks(params, keep_prob, rng)
            result = backward(params, adj, graph.features, masks, spec)
            loss += result.loss
            for name, grad in result.params.items():
                grads[name] += grad
        loss /= samples
        for name, arr in params.arrays().items():
            grads[name] = grads[name] / samples + 2.0 * reg * arr
            loss += reg * float(np.sum(arr * arr))
        return loss, grads

    return objective


def train_bayesian(graph: Graph, split: Split, samples: int = 20, keep_prob: float = 0.5,
                   hidden: int = 128, epochs: int = 200, lr: float = 0.001, seed: int = 0,
                   adj: Optional[sp.spmatrix] = None) -> ModelParams:
    """Train a two-layer GCN under the Monte Carlo dropout objective."""
    _check_samples(samples)
    _check_keep_prob(keep_prob)
    adj = normalize_adjacency(graph) if adj is None else adj
    params = init_params(ModelKind.GCN2, graph.num_features, graph.num_classes, hidden=hidden,
                         seed=derive_seed(seed, "bayes-init"), keep_prob=keep_prob)
    logger.info(f"Training Bayesian GCN (T={samples}, p={keep_prob}, epochs={epochs})")
    objective = bayesian_gradient_fn(graph, split, samples, keep_prob, adj)
    return train(params, graph, split, epochs=epochs, lr=lr, seed=derive_seed(seed, "bayes-train"),
                 gradient_fn=objective, adj=adj)


def stochastic_passes(params: ModelParams, graph: Graph, samples: int, keep_prob: float,
                      seed: int = 0, adj: Optional[sp.spmatrix] = None) -> np.ndarray:
    """Softmax outputs of ``samples`` masked passes, shape (T, n, C); pass i uses stream i."""
    _check_samples(samples)
    _check_keep_prob(keep_prob)
    adj = normalize_adjacency(graph) if adj is None else adj
    passes = []
    for i in range(samples):
        masks = sample_masks(params, keep_prob, derive_rng(seed, "uncertainty", i))
        passes.append(predict_proba(params, adj, graph.features, masks))
    return np.stack(passes)


def estimate_uncertainty(params: ModelParams, graph: Graph, samples: int = 20,
                         keep_prob: float = 0.5, seed: int = 0,
                         adj: Optional[sp.spmatrix] = None) -> np.ndarray:
    """
    Per-node uncertainty: sum over classes of the population variance of the
    softmax probabilities over ``samples`` stochastic passes.

    Returns zeros when ``samples == 1`` or ``keep_prob == 1``.
    """
    _check_samples(samples)
    _check_keep_prob(keep_prob)
    if samples == 1 or keep_prob == 1.0:
        return np.zeros(graph.num_nodes)
    probs = stochastic_passes(params, graph, samples, keep_prob, seed, adj)
    uncertainty = probs.var(axis=0).sum(axis=1)
    logger.debug(f"Uncertainty: mean={uncertainty.mean():.4g} max={uncertainty.max():.4g}")
    return uncertainty


def selection_size(fraction: float, count: int) -> int:
    """ceil(fraction * count), robust to floating-point noise in the product."""
    return int(math.ceil(round(fraction * count, 9)))


def select_targets(uncertainty: np.ndarray, graph: Graph, candidates: Sequence[int],
                   k_percent: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Highest-uncertainty ceil(k * |group candidates|) nodes of each sensitive
    group; ties go to the lower node id. Outputs are sorted.

    Raises:
        UncertaintyError: k_percent outside (0, 1] or a group without candidates
    """
    if not 0 < k_percent <= 1:
        raise UncertaintyError(f"k_percent must be in (0, 1], got {k_percent}")
    candidates = np.unique(np.asarray(candidates, dtype=np.int64))
    uncertainty = np.asarray(uncertainty, dtype=np.float64)
    selected = []
    for group in (0, 1):
        pool = candidates[graph.sensitive[candidates] == group]
        if pool.size == 0:
            raise UncertaintyError(f"sensitive group {group} has no candidate nodes")
        order = np.lexsort((pool, -uncertainty[pool]))
        chosen = pool[order[:selection_size(k_percent, pool.size)]]
        selected.append(np.sort(chosen))
    return selected[0], selected[1]


@dataclass
class UncertaintyReport:
    """Uncertainty of every real node and the targets chosen from it."""

    uncertainty: np.ndarray
    samples: int
    keep_prob: float
    targets_by_group: Tuple[np.ndarray, np.ndarray]
    sensitive: np.ndarray

    def __post_init__(self):
        if (np.asarray(self.uncertainty) < 0).any():
            raise UncertaintyError("uncertainty values must be non-negative")
        t0, t1 = self.targets_by_group
        if np.intersect1d(t0, t1).size:
            raise UncertaintyError("target sets of the two groups overlap")
        for group, targets in enumerate(self.targets_by_group):
            if (self.sensitive[targets] != group).any():
                raise UncertaintyError(f"group-{group} targets include nodes of the other group")

    @property
    def selected(self) -> np.ndarray:
        flags = np.zeros(len(self.uncertainty), dtype=bool)
        for targets in self.targets_by_group:
            flags[targets] = True
        return flags

    def to_csv(self, path: Union[str, Path]):
        """Write node, group, uncertainty, selected."""
        ids = np.arange(len(self.uncertainty))
        lines = ["node,group,uncertainty,selected"]
        for node, group, value, flag in zip(ids, self.sensitive, self.uncertainty, self.selected):
            lines.append(f"{node},{group},{value:.17g},{int(flag)}")
        Path(path).write_text("\n".join(lines) + "\n")
