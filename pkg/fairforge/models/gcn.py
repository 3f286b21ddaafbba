"""
FairForge GNN Models
====================
Two-layer GCN and SGC over a symmetrically normalized adjacency, with
hand-derived reverse-mode gradients to the parameters and to feature rows.

    GCN2:  O = A ReLU(A X (M1*W1) + b1) (M2*W2) + b2
    SGC:   O = A^k X (M1*W1) + b1            (k = hops, default 2)

Dropout acts on weights: M1, M2 are Bernoulli masks over W1, W2.
Everything is float64.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.special import softmax

from fairforge.graph.graph import Graph
from fairforge.models.losses import LossSpec, LossTerms
from fairforge.utils.rng import derive_rng


class ModelShapeError(ValueError):
    """Raised when parameters, masks and inputs disagree in shape."""


class ModelKind(Enum):
    """Supported backbones."""
    GCN2 = "gcn"
    SGC = "sgc"


PARAM_NAMES = ("w1", "b1", "w2", "b2")


@dataclass
class ModelParams:
    """
    Weights of a GCN2 (w1, b1, w2, b2) or an SGC (w1, b1 only).

    ``keep_prob`` is the Bernoulli keep-probability of the weight masks;
    1.0 means a deterministic model.
    """

    kind: ModelKind
    w1: np.ndarray
    b1: np.ndarray
    w2: Optional[np.ndarray] = None
    b2: Optional[np.ndarray] = None
    keep_prob: float = 1.0
    hops: int = 2
    seed: Optional[int] = None

    def __post_init__(self):
        self.kind = ModelKind(self.kind)
        if self.kind is ModelKind.GCN2 and (self.w2 is None or self.b2 is None):
            raise ModelShapeError("GCN2 needs w2 and b2")
        if self.w1.shape[1] != self.b1.shape[0]:
            raise ModelShapeError(f"w1 {self.w1.shape} and b1 {self.b1.shape} disagree")
        if self.kind is ModelKind.GCN2:
            if self.w2.shape[0] != self.w1.shape[1] or self.w2.shape[1] != self.b2.shape[0]:
                raise ModelShapeError(
                    f"w2 {self.w2.shape} incompatible with w1 {self.w1.shape} / b2 {self.b2.shape}"
                )

    @property
    def in_features(self) -> int:
        return self.w1.shape[0]

    @property
    def num_classes(self) -> int:
        return (self.w2 if self.kind is ModelKind.GCN2 else self.w1).shape[1]

    def arrays(self) -> Dict[str, np.ndarray]:
        """Trainable arrays by name, in a fixed order."""
        return {name: getattr(self, name) for name in PARAM_NAMES
                if getattr(self, name) is not None}

    def with_arrays(self, arrays: Dict[str, np.ndarray]) -> 'ModelParams':
        values = {name: getattr(self, name) for name in PARAM_NAMES}
        values.update(arrays)
        return ModelParams(kind=self.kind, keep_prob=self.keep_prob, hops=self.hops,
                           seed=self.seed, **values)

    def copy(self) -> 'ModelParams':
        return self.with_arrays({name: arr.copy() for name, arr in self.arrays().items()})

    def is_finite(self) -> bool:
        return all(np.isfinite(arr).all() for arr in self.arrays().values())

    def norms(self) -> Dict[str, float]:
        return {name: float(np.linalg.norm(arr)) for name, arr in self.arrays().items()}

    def expected(self) -> 'ModelParams':
        """Mean-field weights (keep_prob * W) used for deterministic inference."""
        if self.keep_prob == 1.0:
            return self
        scaled = {name: self.keep_prob * arr for name, arr in self.arrays().items()
                  if name.startswith("w")}
        return self.with_arrays(scaled)

    def equals(self, other: 'ModelParams') -> bool:
        mine, theirs = self.arrays(), other.arrays()
        return mine.keys() == theirs.keys() and all(
            np.array_equal(mine[k], theirs[k]) for k in mine
        )


@dataclass
class WeightMasks:
    """Bernoulli masks for w1 (and w2 for GCN2)."""

    m1: np.ndarray
    m2: Optional[np.ndarray] = None

    @classmethod
    def ones(cls, params: ModelParams) -> 'WeightMasks':
        return cls(np.ones_like(params.w1),
                   None if params.w2 is None else np.ones_like(params.w2))


@dataclass
class Gradients:
    """Gradients of one scalar loss."""

    params: Dict[str, np.ndarray]
    terms: LossTerms
    rows: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    features: Optional[np.ndarray] = None

    @property
    def loss(self) -> float:
        return self.terms.total


def normalize_adjacency(graph) -> sp.csr_matrix:
    """
    D^-1/2 (A + I) D^-1/2 with degrees counted after adding self-loops.

    Accepts a Graph or a raw sparse adjacency.
    """
    adjacency = graph.adjacency if isinstance(graph, Graph) else sp.csr_matrix(graph)
    n = adjacency.shape[0]
    looped = sp.csr_matrix(adjacency, dtype=np.float64) + sp.identity(n, format="csr")
    degree = np.asarray(looped.sum(axis=1)).ravel()
    inv_sqrt = sp.diags(1.0 / np.sqrt(degree))
    normalized = (inv_sqrt @ looped @ inv_sqrt).tocsr()
    normalized.sort_indices()
    return normalized


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_params(kind, in_features: int, num_classes: int, hidden: int = 128,
                seed: int = 0, keep_prob: float = 1.0, hops: int = 2) -> ModelParams:
    """Glorot-uniform weights and zero biases from the seeded stream."""
    kind = ModelKind(kind)
    rng = derive_rng(seed, f"init-{kind.value}")
    if kind is ModelKind.SGC:
        return ModelParams(kind, glorot(rng, in_features, num_classes), np.zeros(num_classes),
                           keep_prob=keep_prob, hops=hops, seed=seed)
    return ModelParams(
        kind,
        glorot(rng, in_features, hidden), np.zeros(hidden),
        glorot(rng, hidden, num_classes), np.zeros(num_classes),
        keep_prob=keep_prob, hops=hops, seed=seed,
    )


def _check(params: ModelParams, adj: sp.spmatrix, features: np.ndarray,
           masks: Optional[WeightMasks]):
    if features.ndim != 2 or features.shape[1] != params.in_features:
        raise ModelShapeError(
            f"features {features.shape} do not match w1 input size {params.in_features}"
        )
    if adj.shape != (features.shape[0], features.shape[0]):
        raise ModelShapeError(f"adjacency {adj.shape} does not match {features.shape[0]} nodes")
    if masks is not None:
        if masks.m1.shape != params.w1.shape:
            raise ModelShapeError(f"mask m1 {masks.m1.shape} != w1 {params.w1.shape}")
        if params.w2 is not None and (masks.m2 is None or masks.m2.shape != params.w2.shape):
            raise ModelShapeError(f"mask m2 does not match w2 {params.w2.shape}")


def _propagate(adj: sp.spmatrix, values: np.ndarray, hops: int) -> np.ndarray:
    for _ in range(hops):
        values = adj @ values
    return values


def _forward_cache(params: ModelParams, adj: sp.spmatrix, features: np.ndarray,
                   masks: Optional[WeightMasks]) -> Dict[str, np.ndarray]:
    _check(params, adj, features, masks)
    w1 = params.w1 if masks is None else masks.m1 * params.w1
    if params.kind is ModelKind.SGC:
        propagated = _propagate(adj, features, params.hops)
        return {"p": propagated, "w1": w1, "out": propagated @ w1 + params.b1}

    w2 = params.w2 if masks is None else masks.m2 * params.w2
    ax = adj @ features
    z1 = ax @ w1 + params.b1
    h1 = np.maximum(z1, 0.0)
    ah = adj @ h1
    return {"ax": ax, "z1": z1, "ah": ah, "w1": w1, "w2": w2, "out": ah @ w2 + params.b2}


def forward(params: ModelParams, adj: sp.spmatrix, features: np.ndarray,
            masks: Optional[WeightMasks] = None) -> np.ndarray:
    """Logits for every node (n x C)."""
    return _forward_cache(params, adj, features, masks)["out"]


def predict_proba(params: ModelParams, adj: sp.spmatrix, features: np.ndarray,
                  masks: Optional[WeightMasks] = None) -> np.ndarray:
    return softmax(forward(params, adj, features, masks), axis=1)


def backward(params: ModelParams, adj: sp.spmatrix, features: np.ndarray,
             masks: Optional[WeightMasks], loss_spec: LossSpec,
             rows: Optional[Sequence[int]] = None) -> Gradients:
    """
    Exact gradients of ``loss_spec`` w.r.t. every parameter and, when
    ``rows`` is given, w.r.t. those feature rows (including any direct
    feature term such as L_CF on injected rows).

    The adjacency must be symmetric; its transpose is not formed.
    """
    cache = _forward_cache(params, adj, features, masks)
    terms, dout, dinjected = loss_spec.evaluate(cache["out"], features)

    grads: Dict[str, np.ndarray] = {}
    if params.kind is ModelKind.SGC:
        dw1 = cache["p"].T @ dout
        grads["w1"] = dw1 if masks is None else dw1 * masks.m1
        grads["b1"] = dout.sum(axis=0)
        dp = dout @ cache["w1"].T
        dx_full = None if rows is None else _propagate(adj, dp, params.hops)
    else:
        dw2 = cache["ah"].T @ dout
        grads["w2"] = dw2 if masks is None else dw2 * masks.m2
        grads["b2"] = dout.sum(axis=0)
        dh1 = adj @ (dout @ cache["w2"].T)
        dz1 = dh1 * (cache["z1"] > 0)
        dw1 = cache["ax"].T @ dz1
        grads["w1"] = dw1 if masks is None else dw1 * masks.m1
        grads["b1"] = dz1.sum(axis=0)
        dx_full = None if rows is None else adj @ (dz1 @ cache["w1"].T)

    result = Gradients(params=grads, terms=terms)
    if rows is not None:
        rows = np.asarray(rows, dtype=np.int64)
        dx = dx_full[rows].copy()
        if dinjected is not None:
            position = {int(node): i for i, node in enumerate(rows)}
            for local, node in enumerate(loss_spec.injected_rows):
                if int(node) in position:
                    dx[position[int(node)]] += dinjected[local]
        result.rows = rows
        result.features = dx
    return result
