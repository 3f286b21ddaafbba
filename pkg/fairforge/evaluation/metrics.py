"""
FairForge Metrics
=================
Group-fairness gaps of hard predictions and their aggregation over seeds.

    delta_sp = mean_y | P(pred=y | s=0) - P(pred=y | s=1) |
    delta_eo = mean_y | P(pred=y | y, s=0) - P(pred=y | y, s=1) |
"""

import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from fairforge.utils.logger import get_logger


logger = get_logger("Metrics")

METRICS = ("accuracy", "delta_sp", "delta_eo")


class MetricsError(ValueError):
    """Raised when a metric is undefined (empty sensitive group or mask)."""


def _groups(sensitive: np.ndarray, mask) -> tuple:
    idx = np.asarray(mask)
    if idx.dtype == bool:
        idx = np.flatnonzero(idx)
    idx = idx.astype(np.int64)
    groups = np.asarray(sensitive)[idx]
    return idx[groups == 0], idx[groups == 1]


def _num_classes(*arrays, num_classes: Optional[int] = None) -> int:
    if num_classes is not None:
        return int(num_classes)
    return int(max(np.max(a) for a in arrays if np.size(a))) + 1


def accuracy(pred: np.ndarray, labels: np.ndarray, mask) -> float:
    idx = np.asarray(mask, dtype=np.int64)
    if idx.size == 0:
        raise MetricsError("accuracy over an empty mask")
    return float((np.asarray(pred)[idx] == np.asarray(labels)[idx]).mean())


def sp_by_class(pred: np.ndarray, sensitive: np.ndarray, mask,
                num_classes: Optional[int] = None) -> np.ndarray:
    """|P(pred=y | s=0) - P(pred=y | s=1)| for every class y."""
    pred = np.asarray(pred)
    group0, group1 = _groups(sensitive, mask)
    if group0.size == 0 or group1.size == 0:
        raise MetricsError("statistical parity needs both sensitive groups on the mask")
    classes = _num_classes(pred[group0], pred[group1], num_classes=num_classes)
    rate0 = np.bincount(pred[group0], minlength=classes)[:classes] / group0.size
    rate1 = np.bincount(pred[group1], minlength=classes)[:classes] / group1.size
    return np.abs(rate0 - rate1)


def delta_sp(pred: np.ndarray, sensitive: np.ndarray, mask,
             num_classes: Optional[int] = None) -> float:
    return float(sp_by_class(pred, sensitive, mask, num_classes).mean())


def eo_by_class(pred: np.ndarray, labels: np.ndarray, sensitive: np.ndarray, mask,
                num_classes: Optional[int] = None) -> Dict[int, float]:
    """
    Per-class recall gap between the groups.

    A class absent from one group is skipped with a warning; a class absent
    from both is skipped silently.
    """
    pred, labels = np.asarray(pred), np.asarray(labels)
    group0, group1 = _groups(sensitive, mask)
    if group0.size == 0 or group1.size == 0:
        raise MetricsError("equal opportunity needs both sensitive groups on the mask")
    classes = _num_classes(labels[group0], labels[group1], num_classes=num_classes)
    gaps = {}
    for cls in range(classes):
        members0 = group0[labels[group0] == cls]
        members1 = group1[labels[group1] == cls]
        if members0.size == 0 or members1.size == 0:
            if members0.size or members1.size:
                logger.warning(f"delta_eo: class {cls} missing from one group, skipped")
            continue
        recall0 = (pred[members0] == cls).mean()
        recall1 = (pred[members1] == cls).mean()
        gaps[cls] = float(abs(recall0 - recall1))
    return gaps


def delta_eo(pred: np.ndarray, labels: np.ndarray, sensitive: np.ndarray, mask,
             num_classes: Optional[int] = None) -> float:
    gaps = eo_by_class(pred, labels, sensitive, mask, num_classes)
    if not gaps:
        logger.warning("delta_eo: no class present in both groups, reporting 0")
        return 0.0
    return float(np.mean(list(gaps.values())))


@dataclass
class SeedMetrics:
    """Metrics of one victim training run."""

    seed: int
    accuracy: float
    delta_sp: float
    delta_eo: float
    sp_by_class: List[float] = field(default_factory=list)
    eo_by_class: Dict[int, float] = field(default_factory=dict)

    def to_dict(self) -> Dict:
        return {
            "seed": self.seed,
            "accuracy": self.accuracy,
            "delta_sp": self.delta_sp,
            "delta_eo": self.delta_eo,
            "sp_by_class": list(self.sp_by_class),
            "eo_by_class": {str(k): v for k, v in self.eo_by_class.items()},
        }


@dataclass
class MetricsReport:
    """Accuracy, delta_sp and delta_eo over seeds (std uses n - 1)."""

    runs: List[SeedMetrics]
    label: str = ""
    victim: str = "gcn"

    def __post_init__(self):
        if not self.runs:
            raise MetricsError("a report needs at least one seed")
        for run in self.runs:
            for name in METRICS:
                value = getattr(run, name)
                if not 0.0 <= value <= 1.0:
                    raise MetricsError(f"seed {run.seed}: {name}={value} outside [0, 1]")

    @property
    def seeds(self) -> List[int]:
        return [run.seed for run in self.runs]

    def values(self, metric: str) -> np.ndarray:
        return np.array([getattr(run, metric) for run in self.runs])

    def mean(self, metric: str) -> float:
        return float(self.values(metric).mean())

    def std(self, metric: str) -> float:
        values = self.values(metric)
        return float(values.std(ddof=1)) if values.size > 1 else 0.0

    def summary(self) -> Dict[str, Dict[str, float]]:
        return {name: {"mean": self.mean(name), "std": self.std(name)} for name in METRICS}

    def to_dict(self) -> Dict:
        return {
            "label": self.label,
            "victim": self.victim,
            "num_seeds": len(self.runs),
            "seeds": self.seeds,
            "summary": self.summary(),
            "runs": [run.to_dict() for run in self.runs],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: Dict) -> 'MetricsReport':
        runs = [
            SeedMetrics(
                seed=run["seed"], accuracy=run["accuracy"], delta_sp=run["delta_sp"],
                delta_eo=run["delta_eo"], sp_by_class=run.get("sp_by_class", []),
                eo_by_class={int(k): v for k, v in run.get("eo_by_class", {}).items()},
            )
            for run in data["runs"]
        ]
        return cls(runs=runs, label=data.get("label", ""), victim=data.get("victim", "gcn"))

    def row(self) -> str:
        cells = [f"{100 * self.mean(m):6.2f} ± {100 * self.std(m):5.2f}" for m in METRICS]
        return f"{self.label:<16} " + "  ".join(cells)


def format_table(reports: Sequence[MetricsReport], title: str = "") -> str:
    """Before/after rows in percent: accuracy, delta_sp, delta_eo as mean ± std."""
    header = f"{'':<16} " + "  ".join(f"{name:>15}" for name in ("Acc (%)", "ΔSP (%)", "ΔEO (%)"))
    lines = [title] if title else []
    lines.append(header)
    lines.append("-" * len(header))
    lines.extend(report.row() for report in reports)
    return "\n".join(lines)
