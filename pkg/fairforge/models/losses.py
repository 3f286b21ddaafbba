"""
FairForge Losses
================
Scalar objectives over logits (and injected feature rows) together with
their exact gradients:

    L_CE   mean cross-entropy over the training nodes
    L_SP   -|| mean_0(h) - mean_1(h) ||^2 over training nodes per group
    L_EO   -( sum_y [mean_{0,y}(h_y) - mean_{1,y}(h_y)] )^2   (summed form)
           -|| [mean_{0,y}(h_y) - mean_{1,y}(h_y)]_y ||^2      (vector form)
    L_CF   -|| mean of group-0 injected rows - mean of group-1 injected rows ||^2

    L = L_CE + alpha * L_CF + beta * (L_SP + L_EO)
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Optional, Tuple

import numpy as np
from scipy.special import log_softmax

from fairforge.utils.logger import get_logger


logger = get_logger("Losses")

Grad = Tuple[float, np.ndarray]


class LossError(ValueError):
    """Raised when a loss is undefined for its inputs."""


class EOForm(Enum):
    """How per-class EO differences are reduced before squaring."""
    SUMMED = "summed"
    VECTOR = "vector"


def _mask(mask, num_nodes: int) -> np.ndarray:
    mask = np.asarray(mask)
    if mask.dtype == bool:
        return np.flatnonzero(mask[:num_nodes])
    return mask.astype(np.int64)


def loss_ce_grad(logits: np.ndarray, labels: np.ndarray, mask) -> Grad:
    """Mean cross-entropy over ``mask`` and its gradient w.r.t. the logits."""
    idx = _mask(mask, logits.shape[0])
    if idx.size == 0:
        raise LossError("cross-entropy over an empty mask")
    targets = np.asarray(labels)[idx]
    if (targets < 0).any():
        raise LossError("cross-entropy mask contains unlabeled nodes")

    log_probs = log_softmax(logits[idx], axis=1)
    value = -log_probs[np.arange(idx.size), targets].mean()

    grad = np.zeros_like(logits)
    local = np.exp(log_probs)
    local[np.arange(idx.size), targets] -= 1.0
    grad[idx] = local / idx.size
    return float(value), grad


def loss_ce(logits: np.ndarray, labels: np.ndarray, mask) -> float:
    return loss_ce_grad(logits, labels, mask)[0]


def _group_members(idx: np.ndarray, sensitive: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    groups = np.asarray(sensitive)[idx]
    return idx[groups == 0], idx[groups == 1]


def loss_sp_grad(logits: np.ndarray, sensitive: np.ndarray, mask) -> Grad:
    """Statistical-parity loss over raw logits and its gradient."""
    idx = _mask(mask, logits.shape[0])
    group0, group1 = _group_members(idx, sensitive)
    if group0.size == 0 or group1.size == 0:
        raise LossError("L_SP needs training nodes in both sensitive groups")

    gap = logits[group0].mean(axis=0) - logits[group1].mean(axis=0)
    grad = np.zeros_like(logits)
    grad[group0] = -2.0 * gap / group0.size
    grad[group1] = 2.0 * gap / group1.size
    return float(-gap @ gap), grad


def loss_sp(logits: np.ndarray, sensitive: np.ndarray, mask) -> float:
    return loss_sp_grad(logits, sensitive, mask)[0]


def loss_eo_grad(logits: np.ndarray, labels: np.ndarray, sensitive: np.ndarray, mask,
                 form: EOForm = EOForm.SUMMED) -> Grad:
    """
    Equal-opportunity loss over the true-class logit and its gradient.

    A class contributes only when both of its (group, class) cells are
    nonempty; classes with an empty cell are skipped.
    """
    idx = _mask(mask, logits.shape[0])
    labels = np.asarray(labels)
    form = EOForm(form)

    cells = []
    for cls in range(logits.shape[1]):
        members = idx[labels[idx] == cls]
        group0, group1 = _group_members(members, sensitive)
        if group0.size == 0 or group1.size == 0:
            if group0.size or group1.size:
                logger.debug(f"L_EO: class {cls} missing from one group, skipped")
            continue
        diff = logits[group0, cls].mean() - logits[group1, cls].mean()
        cells.append((cls, group0, group1, diff))

    grad = np.zeros_like(logits)
    if not cells:
        return 0.0, grad

    diffs = np.array([cell[3] for cell in cells])
    if form is EOForm.SUMMED:
        total = diffs.sum()
        value = -total * total
        outer = np.full(len(cells), total)
    else:
        value = -float(diffs @ diffs)
        outer = diffs
    for (cls, group0, group1, _), coef in zip(cells, outer):
        grad[group0, cls] = -2.0 * coef / group0.size
        grad[group1, cls] = 2.0 * coef / group1.size
    return float(value), grad


def loss_eo(logits: np.ndarray, labels: np.ndarray, sensitive: np.ndarray, mask,
            form: EOForm = EOForm.SUMMED) -> float:
    return loss_eo_grad(logits, labels, sensitive, mask, form)[0]


def loss_cf_grad(injected_features: np.ndarray, groups: np.ndarray) -> Grad:
    """Feature-constraint loss over injected rows and its gradient w.r.t. those rows."""
    groups = np.asarray(groups)
    grad = np.zeros_like(injected_features, dtype=np.float64)
    rows0, rows1 = np.flatnonzero(groups == 0), np.flatnonzero(groups == 1)
    if rows0.size == 0 or rows1.size == 0:
        logger.warning("L_CF: one injected group is empty, constraint contributes 0")
        return 0.0, grad

    gap = injected_features[rows0].mean(axis=0) - injected_features[rows1].mean(axis=0)
    grad[rows0] = -2.0 * gap / rows0.size
    grad[rows1] = 2.0 * gap / rows1.size
    return float(-gap @ gap), grad


def loss_cf(injected_features: np.ndarray, groups: np.ndarray) -> float:
    return loss_cf_grad(injected_features, groups)[0]


@dataclass
class LossTerms:
    """Every component of one loss evaluation."""

    ce: float = 0.0
    sp: float = 0.0
    eo: float = 0.0
    cf: float = 0.0
    total: float = 0.0

    def to_dict(self) -> Dict[str, float]:
        return {"ce": self.ce, "sp": self.sp, "eo": self.eo, "cf": self.cf, "total": self.total}

    def is_finite(self) -> bool:
        return bool(np.isfinite(list(self.to_dict().values())).all())


@dataclass
class LossSpec:
    """
    A weighted composition of the losses above.

    ``weights`` maps component name (ce, sp, eo, cf) to its coefficient; the
    scalar is ``scale * sum(weights[k] * L_k)``. Components with zero weight
    are still evaluated for logging when their inputs are available.
    """

    labels: np.ndarray
    train_idx: np.ndarray
    sensitive: Optional[np.ndarray] = None
    weights: Dict[str, float] = field(default_factory=lambda: {"ce": 1.0})
    injected_rows: Optional[np.ndarray] = None
    injected_groups: Optional[np.ndarray] = None
    eo_form: EOForm = EOForm.SUMMED
    scale: float = 1.0

    @classmethod
    def cross_entropy(cls, labels, train_idx) -> 'LossSpec':
        return cls(labels=labels, train_idx=np.asarray(train_idx))

    @classmethod
    def attack(cls, labels, train_idx, sensitive, alpha: float, beta: float,
               injected_rows, injected_groups,
               eo_form: EOForm = EOForm.SUMMED) -> 'LossSpec':
        """L_CE + alpha * L_CF + beta * (L_SP + L_EO)."""
        return cls(
            labels=labels,
            train_idx=np.asarray(train_idx),
            sensitive=sensitive,
            weights={"ce": 1.0, "cf": alpha, "sp": beta, "eo": beta},
            injected_rows=np.asarray(injected_rows),
            injected_groups=np.asarray(injected_groups),
            eo_form=EOForm(eo_form),
        )

    def weight(self, name: str) -> float:
        return float(self.weights.get(name, 0.0))

    def evaluate(self, logits: np.ndarray,
                 features: np.ndarray) -> Tuple[LossTerms, np.ndarray, Optional[np.ndarray]]:
        """
        Value of every component plus the weighted total.

        Returns:
            (terms, d total / d logits, d total / d injected rows or None)
        """
        terms = LossTerms()
        dlogits = np.zeros_like(logits)

        terms.ce, grad = loss_ce_grad(logits, self.labels, self.train_idx)
        dlogits += self.weight("ce") * grad

        if self.sensitive is not None:
            terms.sp, grad = loss_sp_grad(logits, self.sensitive, self.train_idx)
            dlogits += self.weight("sp") * grad
            terms.eo, grad = loss_eo_grad(logits, self.labels, self.sensitive,
                                          self.train_idx, self.eo_form)
            dlogits += self.weight("eo") * grad

        dinjected = None
        if self.injected_rows is not None and self.injected_rows.size:
            terms.cf, dinjected = loss_cf_grad(features[self.injected_rows], self.injected_groups)
            dinjected = self.scale * self.weight("cf") * dinjected

        terms.total = self.scale * sum(
            self.weight(name) * getattr(terms, name) for name in ("ce", "sp", "eo", "cf")
        )
        return terms, self.scale * dlogits, dinjected


def total_loss(terms: LossTerms, alpha: float, beta: float) -> float:
    """L_CE + alpha * L_CF + beta * (L_SP + L_EO) from already computed components."""
    return terms.ce + alpha * terms.cf + beta * (terms.sp + terms.eo)
