"""
Victim retraining protocol: train a fresh GCN or SGC per seed on a (possibly
poisoned) graph, select by validation accuracy, score the test split.
"""

from dataclasses import asdict, dataclass
from typing import Any, Dict, Optional, Sequence

import scipy.sparse as sp

from fairforge.core.engine import map_seeds
from fairforge.graph.graph import Graph, GraphError, Split
from fairforge.models.gcn import ModelKind, ModelParams, forward, init_params, normalize_adjacency
from fairforge.models.training import train
from fairforge.evaluation.metrics import (
    MetricsReport,
    SeedMetrics,
    accuracy,
    delta_eo,
    delta_sp,
    eo_by_class,
    sp_by_class,
)
from fairforge.utils.logger import get_logger
from fairforge.utils.rng import derive_seed


logger = get_logger("Victim")


@dataclass(frozen=True)
class VictimConfig:
    """Victim architecture and training budget."""

    kind: str = ModelKind.GCN2.value
    hidden: int = 128
    lr: float = 0.001
    max_epochs: int = 500
    patience: int = 30
    sgc_hops: int = 2

    @classmethod
    def from_dict(cls, values: Dict[str, Any]) -> 'VictimConfig':
        known = set(cls.__dataclass_fields__)
        cleaned = {}
        for key, value in values.items():
            name = key[len("victim."):] if key.startswith("victim.") else key
            if name in known:
                cleaned[name] = value
        return cls(**cleaned)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _check_split(graph: Graph, split: Split):
    split.validate_against(graph)
    if len(split.test) == 0:
        raise GraphError("victim evaluation needs a non-empty test split")


def train_victim(graph: Graph, split: Split, seed: int, cfg: VictimConfig,
                 adj: Optional[sp.spmatrix] = None) -> ModelParams:
    """Fresh victim trained with early stopping on validation accuracy."""
    params = init_params(cfg.kind, graph.num_features, graph.num_classes, hidden=cfg.hidden,
                         seed=derive_seed(seed, "victim-init"), hops=cfg.sgc_hops)
    return train(params, graph, split, epochs=cfg.max_epochs, lr=cfg.lr,
                 seed=derive_seed(seed, "victim-train"), patience=cfg.patience, adj=adj)


def score(params: ModelParams, graph: Graph, split: Split, seed: int,
          adj: Optional[sp.spmatrix] = None) -> SeedMetrics:
    """Test accuracy and fairness gaps of a trained model; injected nodes are never scored."""
    adj = normalize_adjacency(graph) if adj is None else adj
    pred = forward(params.expected(), adj, graph.features).argmax(axis=1)
    test = split.test
    classes = graph.num_classes
    return SeedMetrics(
        seed=int(seed),
        accuracy=accuracy(pred, graph.labels, test),
        delta_sp=delta_sp(pred, graph.sensitive, test, classes),
        delta_eo=delta_eo(pred, graph.labels, graph.sensitive, test, classes),
        sp_by_class=sp_by_class(pred, graph.sensitive, test, classes).tolist(),
        eo_by_class=eo_by_class(pred, graph.labels, graph.sensitive, test, classes),
    )


def evaluate_seed(graph: Graph, split: Split, seed: int, cfg: VictimConfig,
                  adj: Optional[sp.spmatrix] = None) -> SeedMetrics:
    params = train_victim(graph, split, seed, cfg, adj)
    metrics = score(params, graph, split, seed, adj)
    logger.debug(
        f"seed {seed}: acc={metrics.accuracy:.4f} dSP={metrics.delta_sp:.4f} "
        f"dEO={metrics.delta_eo:.4f}"
    )
    return metrics


def evaluate_victim(graph: Graph, split: Split, kind=ModelKind.GCN2,
                    seeds: Sequence[int] = (0, 1, 2, 3, 4), cfg: Optional[VictimConfig] = None,
                    workers: int = 1, label: str = "") -> MetricsReport:
    """
    Train the victim from scratch once per seed and aggregate test metrics.

    Args:
        graph: Clean or poisoned graph
        split: Split over original labeled nodes
        kind: "gcn" or "sgc" (overrides ``cfg.kind``)
        seeds: Victim seeds
        cfg: Training budget; defaults to patience 30, at most 500 epochs
        workers: Seeds trained in parallel
        label: Row label for tables
    """
    cfg = cfg or VictimConfig()
    kind = ModelKind(kind.value if isinstance(kind, ModelKind) else kind)
    cfg = VictimConfig(**{**cfg.to_dict(), "kind": kind.value})
    _check_split(graph, split)
    adj = normalize_adjacency(graph)

    logger.info(f"Evaluating {kind.value} victim on {len(seeds)} seeds ({label or 'graph'})")
    runs = map_seeds(lambda seed: evaluate_seed(graph, split, seed, cfg, adj), seeds, workers)
    report = MetricsReport(runs=runs, label=label, victim=kind.value)
    logger.info(
        f"{label or 'graph'}: acc={report.mean('accuracy'):.4f} "
        f"dSP={report.mean('delta_sp'):.4f} dEO={report.mean('delta_eo'):.4f}"
    )
    return report

