"""
FairForge Graph Files
=====================
On-disk layout of one graph directory:

    edges.tsv       two columns of 0-based node ids, one undirected edge per line
    features.csv    one row per node (or features.bin, see below)
    labels.csv      node id, class index (-1 for unlabeled nodes)
    sensitive.csv   node id, binary sensitive attribute
    split.json      train/val/test index lists (optional)
    plan.json       injection plan sidecar (poisoned graphs only)

``features.bin`` holds an 8-byte header (num_nodes, D as little-endian
uint32) followed by little-endian float32 values in row-major order.
"""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np

from fairforge.graph.graph import (
    UNLABELED,
    Graph,
    GraphError,
    InjectionPlan,
    Split,
    adjacency_from_edges,
)
from fairforge.utils.logger import get_logger


logger = get_logger("GraphIO")

PathLike = Union[str, Path]

EDGE_FILE = "edges.tsv"
FEATURE_FILE = "features.csv"
FEATURE_BIN_FILE = "features.bin"
LABEL_FILE = "labels.csv"
SENSITIVE_FILE = "sensitive.csv"
SPLIT_FILE = "split.json"
PLAN_FILE = "plan.json"


@dataclass
class GraphBundle:
    """A graph directory loaded into memory."""

    graph: Graph
    split: Optional[Split] = None
    plan: Optional[InjectionPlan] = None
    clean_nodes: Optional[int] = None


def _read_table(path: Path, columns: int, dtype) -> np.ndarray:
    data = np.loadtxt(path, delimiter="\t" if path.suffix == ".tsv" else ",",
                      dtype=dtype, ndmin=2)
    if data.size == 0:
        return np.empty((0, columns), dtype=dtype)
    if data.shape[1] != columns:
        raise GraphError(f"{path.name}: expected {columns} columns, got {data.shape[1]}")
    return data


def read_features(path: PathLike) -> np.ndarray:
    """Read a feature matrix from CSV or the binary float32 format."""
    path = Path(path)
    if path.suffix == ".bin":
        raw = path.read_bytes()
        if len(raw) < 8:
            raise GraphError(f"{path.name}: truncated header")
        num_nodes, dim = np.frombuffer(raw[:8], dtype="<u4")
        values = np.frombuffer(raw[8:], dtype="<f4")
        if values.size != int(num_nodes) * int(dim):
            raise GraphError(
                f"{path.name}: header says {num_nodes}x{dim}, found {values.size} values"
            )
        return values.reshape(int(num_nodes), int(dim)).astype(np.float64)
    return np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)


def write_features(path: PathLike, features: np.ndarray):
    path = Path(path)
    if path.suffix == ".bin":
        header = np.array(features.shape, dtype="<u4").tobytes()
        path.write_bytes(header + np.ascontiguousarray(features, dtype="<f4").tobytes())
    else:
        np.savetxt(path, features, delimiter=",", fmt="%.17g")


def _read_attribute(path: Path, num_nodes: int, name: str) -> np.ndarray:
    table = _read_table(path, 2, np.int64)
    ids, values = table[:, 0], table[:, 1]
    if ids.size and (ids.min() < 0 or ids.max() >= num_nodes):
        raise GraphError(f"{name}: node id out of range [0, {num_nodes})")
    covered = np.zeros(num_nodes, dtype=bool)
    covered[ids] = True
    if not covered.all() or len(np.unique(ids)) != len(ids):
        missing = np.flatnonzero(~covered)
        raise GraphError(
            f"{name}: every node needs exactly one value; missing {missing[:10].tolist()}"
        )
    result = np.empty(num_nodes, dtype=np.int64)
    result[ids] = values
    return result


def load_graph(edge_path: PathLike, feature_path: PathLike, label_path: PathLike,
               sensitive_path: PathLike, injected: Optional[np.ndarray] = None) -> Graph:
    """
    Load a graph from its four files; edges are symmetrized and deduplicated.

    Raises:
        GraphError: missing node coverage, non-binary sensitive values or row mismatches
    """
    features = read_features(feature_path)
    num_nodes = features.shape[0]
    edges = _read_table(Path(edge_path), 2, np.int64)
    if edges.size and edges.max() >= num_nodes:
        raise GraphError(
            f"edge list references node {edges.max()} but features have {num_nodes} rows"
        )
    labels = _read_attribute(Path(label_path), num_nodes, "labels")
    sensitive = _read_attribute(Path(sensitive_path), num_nodes, "sensitive")
    bad = np.flatnonzero(~np.isin(sensitive, (0, 1)))
    if bad.size:
        raise GraphError(
            f"sensitive: non-binary values {np.unique(sensitive[bad]).tolist()} "
            f"at nodes {bad[:10].tolist()}"
        )
    labels = np.where(labels < 0, UNLABELED, labels)
    if injected is None:
        injected = np.zeros(num_nodes, dtype=bool)

    graph = Graph(adjacency_from_edges(num_nodes, edges), features, labels, sensitive, injected)
    logger.info(f"Loaded graph: {graph.num_nodes} nodes, {graph.num_edges} edges")
    return graph


def write_graph_files(graph: Graph, directory: PathLike,
                      feature_format: str = "csv") -> Dict[str, Path]:
    """Write the four graph files into ``directory``; returns their paths."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    ids = np.arange(graph.num_nodes)
    paths = {
        "edges": directory / EDGE_FILE,
        "features": directory / (FEATURE_BIN_FILE if feature_format == "bin" else FEATURE_FILE),
        "labels": directory / LABEL_FILE,
        "sensitive": directory / SENSITIVE_FILE,
    }
    np.savetxt(paths["edges"], graph.edge_array(), delimiter="\t", fmt="%d")
    write_features(paths["features"], graph.features)
    np.savetxt(paths["labels"], np.column_stack([ids, graph.labels]), delimiter=",", fmt="%d")
    np.savetxt(paths["sensitive"], np.column_stack([ids, graph.sensitive]), delimiter=",", fmt="%d")
    return paths


def save_graph(graph: Graph, directory: PathLike, split: Optional[Split] = None,
               plan: Optional[InjectionPlan] = None,
               feature_format: str = "csv") -> Dict[str, Path]:
    """Write a graph directory (plus split and plan sidecar when given)."""
    directory = Path(directory)
    paths = write_graph_files(graph, directory, feature_format)
    if split is not None:
        paths["split"] = directory / SPLIT_FILE
        paths["split"].write_text(json.dumps(split.to_dict()))
    if plan is not None:
        sidecar = plan.to_dict()
        sidecar["clean_nodes"] = graph.num_nodes - plan.num_injected
        paths["plan"] = directory / PLAN_FILE
        paths["plan"].write_text(json.dumps(sidecar, indent=2, sort_keys=True))
    return paths


def load_graph_dir(directory: PathLike) -> GraphBundle:
    """Load a directory written by ``save_graph``."""
    directory = Path(directory)
    if not directory.is_dir():
        raise GraphError(f"graph directory not found: {directory}")
    feature_path = directory / FEATURE_FILE
    if not feature_path.exists():
        feature_path = directory / FEATURE_BIN_FILE

    plan_data = None
    injected = None
    if (directory / PLAN_FILE).exists():
        plan_data = json.loads((directory / PLAN_FILE).read_text())

    features = read_features(feature_path)
    if plan_data is not None:
        injected = np.zeros(features.shape[0], dtype=bool)
        injected[plan_data["clean_nodes"]:] = True

    graph = load_graph(directory / EDGE_FILE, feature_path, directory / LABEL_FILE,
                       directory / SENSITIVE_FILE, injected=injected)
    split = None
    if (directory / SPLIT_FILE).exists():
        split = Split.from_dict(json.loads((directory / SPLIT_FILE).read_text()))
        split.validate_against(graph)

    plan = None
    clean_nodes = None
    if plan_data is not None:
        clean_nodes = int(plan_data["clean_nodes"])
        plan = InjectionPlan.from_dict(plan_data, graph.features[clean_nodes:])
    return GraphBundle(graph=graph, split=split, plan=plan, clean_nodes=clean_nodes)


def strip_injected(poisoned: Graph, clean_nodes: int) -> Graph:
    """The clean graph underlying a poisoned one (first ``clean_nodes`` nodes)."""
    keep = np.arange(clean_nodes)
    return Graph(
        adjacency=poisoned.adjacency[keep][:, keep],
        features=poisoned.features[keep],
        labels=poisoned.labels[keep],
        sensitive=poisoned.sensitive[keep],
        injected=poisoned.injected[keep],
    )
