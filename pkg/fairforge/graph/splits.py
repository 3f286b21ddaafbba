"""
Stratified train/val/test splits over labeled original nodes.
"""

from typing import Sequence

import numpy as np

from fairforge.graph.graph import Graph, GraphError, Split
from fairforge.utils.logger import get_logger
from fairforge.utils.rng import derive_rng


logger = get_logger("Splits")

DEFAULT_RATIOS = (0.5, 0.25, 0.25)


def _apportion(counts: np.ndarray, ratio: float, total: int) -> np.ndarray:
    """Largest-remainder allocation of ``total`` across classes in proportion to ``counts``."""
    exact = counts * ratio
    base = np.floor(exact).astype(np.int64)
    base = np.minimum(base, counts)
    remaining = total - base.sum()
    if remaining > 0:
        room = counts - base
        order = np.lexsort((np.arange(len(counts)), -(exact - base)))
        for cls in order:
            if remaining == 0:
                break
            if room[cls] > 0:
                base[cls] += 1
                remaining -= 1
    return base


def make_split(graph: Graph, ratios: Sequence[float] = DEFAULT_RATIOS,
               seed: int = 0) -> Split:
    """
    Split labeled original nodes into train/val/test, stratified by class.

    Overall sizes are round(ratio * |labeled|); each class receives its share
    within one node of rounding slack.

    Raises:
        GraphError: ratios not summing to 1, or a class with < 3 labeled nodes
    """
    ratios = np.asarray(ratios, dtype=np.float64)
    if ratios.shape != (3,) or (ratios < 0).any() or not np.isclose(ratios.sum(), 1.0):
        raise GraphError(
            f"split ratios must be three non-negative values summing to 1, got {ratios}"
        )

    labeled = graph.labeled_nodes()
    labels = graph.labels[labeled]
    classes, counts = np.unique(labels, return_counts=True)
    small = classes[counts < 3]
    if small.size:
        raise GraphError(f"classes {small.tolist()} have fewer than 3 labeled nodes")

    total = len(labeled)
    n_train = _apportion(counts, ratios[0], int(round(ratios[0] * total)))
    n_val = _apportion(counts - n_train, ratios[1] / max(1.0 - ratios[0], 1e-12),
                       int(round(ratios[1] * total)))

    rng = derive_rng(seed, "split")
    train, val, test = [], [], []
    for cls, k_train, k_val in zip(classes, n_train, n_val):
        members = rng.permutation(labeled[labels == cls])
        train.append(members[:k_train])
        val.append(members[k_train:k_train + k_val])
        test.append(members[k_train + k_val:])

    split = Split(train=np.concatenate(train), val=np.concatenate(val), test=np.concatenate(test))
    logger.debug(f"Split sizes: {len(split.train)}/{len(split.val)}/{len(split.test)}")
    return split
