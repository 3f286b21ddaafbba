"""
Uncertainty-masking defense: drop the most uncertain training nodes of a
(possibly poisoned) graph before the victim is trained.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from fairforge.attack.uncertainty import estimate_uncertainty, selection_size
from fairforge.evaluation.metrics import METRICS, MetricsReport
from fairforge.evaluation.victim import VictimConfig, evaluate_victim
from fairforge.graph.graph import Graph, Split
from fairforge.models.gcn import ModelParams
from fairforge.utils.logger import get_logger


logger = get_logger("Defense")


class DefenseError(ValueError):
    """Raised for eta outside [0, 1] or a mask that would empty the training split."""


def defend_mask(graph: Graph, split: Split, bayesian: Optional[ModelParams], eta: float,
                samples: int = 20, keep_prob: float = 0.5, seed: int = 0,
                uncertainty: Optional[np.ndarray] = None) -> Split:
    """
    Remove the ceil(eta * |train|) highest-uncertainty training nodes
    (ties to the lower id); validation and test are untouched.

    ``uncertainty`` may be passed to reuse one estimate across several etas;
    otherwise it is recomputed on ``graph`` with ``bayesian``.
    """
    if not 0 <= eta <= 1:
        raise DefenseError(f"eta must lie in [0, 1], got {eta}")
    removed = selection_size(eta, len(split.train))
    if removed == 0:
        return split
    if removed >= len(split.train):
        raise DefenseError(
            f"eta={eta} would remove all {len(split.train)} training nodes"
        )
    if uncertainty is None:
        if bayesian is None:
            raise DefenseError("defend_mask needs a Bayesian model or precomputed uncertainty")
        uncertainty = estimate_uncertainty(bayesian, graph, samples, keep_prob, seed)
    train = split.train
    order = np.lexsort((train, -np.asarray(uncertainty)[train]))
    dropped = train[order[:removed]]
    logger.debug(f"eta={eta}: masked {removed} of {len(train)} training nodes")
    return split.replace(train=np.setdiff1d(train, dropped))


@dataclass
class DefenseSweep:
    """Victim metrics at each masking rate."""

    etas: List[float]
    removed: List[int]
    reports: List[MetricsReport]
    baseline: Optional[MetricsReport] = None
    info: Dict = field(default_factory=dict)

    def to_dict(self) -> Dict:
        data = {
            "etas": self.etas,
            "removed": self.removed,
            "reports": [report.to_dict() for report in self.reports],
        }
        if self.baseline is not None:
            data["baseline"] = self.baseline.to_dict()
        data.update(self.info)
        return data

    def table(self) -> str:
        lines = [f"{'eta':>5} {'masked':>7}  " + "  ".join(f"{m:>15}" for m in METRICS)]
        for eta, removed, report in zip(self.etas, self.removed, self.reports):
            cells = [f"{100 * report.mean(m):6.2f} ± {100 * report.std(m):5.2f}" for m in METRICS]
            lines.append(f"{eta:>5.2f} {removed:>7}  " + "  ".join(cells))
        if self.baseline is not None:
            cells = [f"{100 * self.baseline.mean(m):6.2f} ± {100 * self.baseline.std(m):5.2f}"
                     for m in METRICS]
            lines.append(f"{'clean':>5} {'-':>7}  " + "  ".join(cells))
        return "\n".join(lines)


def defense_sweep(graph: Graph, split: Split, bayesian: ModelParams, etas: Sequence[float],
                  kind="gcn", seeds: Sequence[int] = (0, 1, 2, 3, 4),
                  cfg: Optional[VictimConfig] = None, samples: int = 20,
                  keep_prob: float = 0.5, seed: int = 0, workers: int = 1) -> DefenseSweep:
    """Evaluate the victim under every masking rate; uncertainty is estimated once."""
    scores = estimate_uncertainty(bayesian, graph, samples, keep_prob, seed)
    reports, removed = [], []
    for eta in etas:
        masked = defend_mask(graph, split, None, eta, uncertainty=scores)
        removed.append(len(split.train) - len(masked.train))
        reports.append(evaluate_victim(graph, masked, kind, seeds, cfg, workers,
                                       label=f"eta={eta:g}"))
    return DefenseSweep(etas=[float(e) for e in etas], removed=removed, reports=reports)
