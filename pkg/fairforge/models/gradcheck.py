"""
Finite-difference gradient checking for the hand-derived backward pass.
"""

from typing import Callable, Dict, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from fairforge.models.gcn import ModelParams, WeightMasks, backward, forward
from fairforge.models.losses import LossSpec


def numerical_gradient(fn: Callable[[], float], array: np.ndarray,
                       eps: float = 1e-4) -> np.ndarray:
    """
    Central differences of ``fn`` w.r.t. every entry of ``array``.

    ``array`` is perturbed in place and restored after each entry.
    """
    grad = np.zeros_like(array, dtype=np.float64)
    flat = array.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + eps
        plus = fn()
        flat[i] = original - eps
        minus = fn()
        flat[i] = original
        out[i] = (plus - minus) / (2.0 * eps)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """||a - n|| / max(||a|| + ||n||, tiny); 0 when both vanish."""
    denom = np.linalg.norm(analytic) + np.linalg.norm(numeric)
    if denom < 1e-14:
        return 0.0
    return float(np.linalg.norm(analytic - numeric) / denom)


def check_gradients(params: ModelParams, adj: sp.spmatrix, features: np.ndarray,
                    loss_spec: LossSpec, rows: Optional[Sequence[int]] = None,
                    masks: Optional[WeightMasks] = None,
                    eps: float = 1e-4) -> Dict[str, float]:
    """
    Relative error between analytic and numeric gradients for every
    parameter array and, when ``rows`` is given, for those feature rows.
    """
    analytic = backward(params, adj, features, masks, loss_spec, rows=rows)
    work = params.copy()
    x = np.array(features, dtype=np.float64, copy=True)

    def loss() -> float:
        logits = forward(work, adj, x, masks)
        return loss_spec.evaluate(logits, x)[0].total

    errors = {}
    for name, array in work.arrays().items():
        numeric = numerical_gradient(loss, array, eps)
        errors[name] = relative_error(analytic.params[name], numeric)
    if rows is not None:
        rows = np.asarray(rows, dtype=np.int64)
        numeric = np.zeros((rows.size, x.shape[1]))
        for i, row in enumerate(rows):
            numeric[i] = numerical_gradient(loss, x[row], eps)
        errors["features"] = relative_error(analytic.features, numeric)
    return errors
