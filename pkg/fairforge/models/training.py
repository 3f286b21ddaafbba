"""
FairForge Training
==================
Adaptive-moment gradient descent and the full-batch training loop with
best-validation model selection.
"""

from typing import Callable, Dict, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from fairforge.graph.graph import Graph, Split
from fairforge.models.gcn import (
    Gradients,
    ModelParams,
    WeightMasks,
    backward,
    forward,
    normalize_adjacency,
)
from fairforge.models.losses import LossSpec
from fairforge.utils.logger import get_logger
from fairforge.utils.rng import derive_rng


logger = get_logger("Training")

GradientFn = Callable[[ModelParams, np.random.Generator], Tuple[float, Dict[str, np.ndarray]]]


class TrainingError(RuntimeError):
    """Raised when training diverges; carries diagnostics for the report."""

    def __init__(self, message: str, diagnostics: Dict):
        self.diagnostics = diagnostics
        super().__init__(f"{message} ({diagnostics})")


class AdamOptimizer:
    """
    Adam over named arrays: the parameters of a ModelParams or any other
    dict of arrays.

    State (moments and step count) lives on the optimizer, so calling
    ``step`` across several loops resumes rather than restarts.
    """

    def __init__(self, lr: float = 0.001, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m: Dict[str, np.ndarray] = {}
        self._v: Dict[str, np.ndarray] = {}

    def step(self, params: ModelParams, grads: Dict[str, np.ndarray]) -> ModelParams:
        return params.with_arrays(self.step_arrays(params.arrays(), grads))

    def step_arrays(self, arrays: Dict[str, np.ndarray],
                    grads: Dict[str, np.ndarray]) -> Dict[str, np.ndarray]:
        """One update of plain named arrays; the inputs are not modified."""
        self.t += 1
        correction1 = 1.0 - self.beta1 ** self.t
        correction2 = 1.0 - self.beta2 ** self.t
        updated = {}
        for name, value in arrays.items():
            grad = grads[name]
            m = self._m.get(name, np.zeros_like(value))
            v = self._v.get(name, np.zeros_like(value))
            m = self.beta1 * m + (1.0 - self.beta1) * grad
            v = self.beta2 * v + (1.0 - self.beta2) * grad * grad
            self._m[name], self._v[name] = m, v
            step = (m / correction1) / (np.sqrt(v / correction2) + self.eps)
            updated[name] = value - self.lr * step
        return updated

    def reset(self):
        """Forget moments and step count."""
        self.t = 0
        self._m.clear()
        self._v.clear()


def accuracy(logits: np.ndarray, labels: np.ndarray, idx: np.ndarray) -> float:
    idx = np.asarray(idx, dtype=np.int64)
    if idx.size == 0:
        return float("nan")
    return float((logits[idx].argmax(axis=1) == labels[idx]).mean())


def ce_gradients(params: ModelParams, adj: sp.spmatrix, features: np.ndarray,
                 labels: np.ndarray, train_idx: np.ndarray,
                 masks: Optional[WeightMasks] = None) -> Gradients:
    return backward(params, adj, features, masks, LossSpec.cross_entropy(labels, train_idx))


def _ensure_finite(loss: float, params: ModelParams, epoch: int):
    if not np.isfinite(loss) or not params.is_finite():
        raise TrainingError(
            "non-finite loss during training",
            {"epoch": epoch, "loss": loss, "param_norms": params.norms()},
        )


def train(params: ModelParams, graph: Graph, split: Split, epochs: int = 200,
          lr: float = 0.001, seed: int = 0, *, patience: Optional[int] = None,
          gradient_fn: Optional[GradientFn] = None,
          adj: Optional[sp.spmatrix] = None, log_every: int = 50) -> ModelParams:
    """
    Full-batch training on ``split.train``; returns the parameters with the
    best validation accuracy (first occurrence on ties).

    Args:
        params: Initial parameters (not modified)
        graph: Graph to train on (clean or poisoned)
        split: Original labeled-node split
        epochs: Maximum number of epochs; 0 returns a copy of ``params``
        lr: Adam learning rate
        seed: Seed of the stream handed to ``gradient_fn``
        patience: Stop after this many epochs without validation improvement
        gradient_fn: Custom objective (params, rng) -> (loss, grads); defaults to CE
        adj: Precomputed normalized adjacency of ``graph``
        log_every: Epoch interval of progress logs

    Raises:
        TrainingError: on a non-finite loss or parameters
    """
    if len(split.train) == 0:
        raise TrainingError("empty training split", {"epoch": 0})
    if epochs <= 0:
        return params.copy()

    adj = normalize_adjacency(graph) if adj is None else adj
    features, labels = graph.features, graph.labels
    rng = derive_rng(seed, "train")
    optimizer = AdamOptimizer(lr=lr)

    best = params.copy()
    best_acc = -1.0
    since_best = 0
    current = params
    for epoch in range(1, epochs + 1):
        if gradient_fn is None:
            grads = ce_gradients(current, adj, features, labels, split.train)
            loss, param_grads = grads.loss, grads.params
        else:
            loss, param_grads = gradient_fn(current, rng)
        _ensure_finite(loss, current, epoch)
        current = optimizer.step(current, param_grads)

        logits = forward(current.expected(), adj, features)
        val_acc = accuracy(logits, labels, split.val) if len(split.val) else -loss
        if val_acc > best_acc:
            best, best_acc, since_best = current, val_acc, 0
        else:
            since_best += 1

        if log_every and epoch % log_every == 0:
            logger.debug(f"epoch {epoch}: loss={loss:.4f} val_acc={val_acc:.4f}")
        if patience is not None and since_best >= patience:
            logger.debug(f"Early stop at epoch {epoch} (best val_acc={best_acc:.4f})")
            break

    return best
