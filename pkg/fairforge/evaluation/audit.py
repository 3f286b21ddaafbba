"""
FairForge Structural Audit
==========================
Degree and path statistics used to judge how noticeable an injection is,
following the usual graph-generation statistics conventions:

    gini                 2 * sum_i i * d_(i) / (n * sum d) - (n + 1) / n, degrees ascending
    assortativity        Pearson correlation of endpoint degrees over both edge directions
    power-law exponent   1 + n / sum ln(d_i / (d_min - 0.5)) over d_i >= d_min = 1
    triangles            sorted-neighbor intersections over edges u < v < w
    edge entropy         -sum (d_i / 2m) ln(d_i / 2m) / ln n
    path length          mean hop distance over reachable ordered pairs
"""

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse import csgraph

from fairforge.graph.graph import Graph
from fairforge.utils.logger import get_logger
from fairforge.utils.rng import derive_rng


logger = get_logger("Audit")

STATISTICS = (
    "gini_degree",
    "assortativity",
    "power_law_exponent",
    "triangle_count",
    "relative_edge_entropy",
    "characteristic_path_length",
)


# |r| below this counts as no degree mixing
ASSORTATIVITY_FLOOR = 0.1
RELATIVE_FLOORS = {"assortativity": ASSORTATIVITY_FLOOR}


class AuditError(ValueError):
    """Raised when statistics are requested for a graph with fewer than 3 nodes."""


def gini_degree(degrees: np.ndarray) -> float:
    d = np.sort(np.asarray(degrees, dtype=np.float64))
    n, total = d.size, d.sum()
    if total == 0:
        return 0.0
    ranks = np.arange(1, n + 1)
    return float(2.0 * np.sum(ranks * d) / (n * total) - (n + 1) / n)


def assortativity(graph: Graph) -> float:
    """Degree assortativity; 0.0 when the endpoint degrees have no variance."""
    edges = graph.edge_array()
    if edges.size == 0:
        return 0.0
    degrees = graph.degrees().astype(np.float64)
    x = np.concatenate([degrees[edges[:, 0]], degrees[edges[:, 1]]])
    y = np.concatenate([degrees[edges[:, 1]], degrees[edges[:, 0]]])
    if x.std() == 0 or y.std() == 0:
        return 0.0
    return float(np.corrcoef(x, y)[0, 1])


def power_law_exponent(degrees: np.ndarray, d_min: int = 1) -> float:
    """Continuous MLE with the -0.5 discreteness correction; nan when no degree reaches d_min."""
    d = np.asarray(degrees, dtype=np.float64)
    d = d[d >= d_min]
    if d.size == 0:
        return float("nan")
    return float(1.0 + d.size / np.sum(np.log(d / (d_min - 0.5))))


def triangle_count(graph: Graph) -> int:
    adjacency = graph.adjacency
    total = 0
    for u, v in graph.edge_array():
        nu = adjacency.indices[adjacency.indptr[u]:adjacency.indptr[u + 1]]
        nv = adjacency.indices[adjacency.indptr[v]:adjacency.indptr[v + 1]]
        # count each triangle once, at its two smallest vertices
        total += np.intersect1d(nu[nu > v], nv[nv > v], assume_unique=True).size
    return int(total)


def relative_edge_entropy(degrees: np.ndarray) -> float:
    d = np.asarray(degrees, dtype=np.float64)
    n, two_m = d.size, d.sum()
    if two_m == 0 or n < 2:
        return 0.0
    share = d[d > 0] / two_m
    return float(-np.sum(share * np.log(share)) / np.log(n))


def path_length(graph: Graph, mode: str = "auto", exact_threshold: int = 5000,
                sample_sources: int = 1000, seed: int = 0) -> Tuple[float, float]:
    """
    Mean shortest-path length over reachable ordered pairs and the fraction
    of unreachable pairs. Exact when ``mode`` is "exact" (or "auto" with
    n <= exact_threshold); otherwise BFS from sampled sources.
    """
    n = graph.num_nodes
    exact = mode == "exact" or (mode == "auto" and n <= exact_threshold)
    if exact or sample_sources >= n:
        sources = np.arange(n)
    else:
        rng = derive_rng(seed, "audit-sources")
        sources = np.sort(rng.choice(n, sample_sources, replace=False))
    distances = csgraph.shortest_path(graph.adjacency, directed=False, unweighted=True,
                                      indices=sources)
    off_diagonal = np.ones(distances.shape, dtype=bool)
    off_diagonal[np.arange(len(sources)), sources] = False
    values = distances[off_diagonal]
    reachable = np.isfinite(values)
    if not reachable.any():
        return float("nan"), 1.0
    return float(values[reachable].mean()), float(1.0 - reachable.mean())


@dataclass
class AuditReport:
    """Structural statistics of one graph."""

    gini_degree: float
    assortativity: float
    power_law_exponent: float
    triangle_count: int
    relative_edge_entropy: float
    characteristic_path_length: float
    unreachable_fraction: float = 0.0
    num_nodes: int = 0
    num_edges: int = 0

    def values(self) -> Dict[str, float]:
        return {name: getattr(self, name) for name in STATISTICS}

    def to_dict(self) -> Dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict) -> 'AuditReport':
        return cls(**{k: v for k, v in data.items() if k in cls.__dataclass_fields__})


def graph_statistics(graph: Graph, path_length_mode: str = "auto",
                     exact_threshold: int = 5000, sample_sources: int = 1000,
                     seed: int = 0, workers: int = 1) -> AuditReport:
    """
    All audit statistics of ``graph``.

    Raises:
        AuditError: fewer than 3 nodes
    """
    if graph.num_nodes < 3:
        raise AuditError(f"audit needs at least 3 nodes, got {graph.num_nodes}")
    degrees = graph.degrees()
    jobs = {
        "gini_degree": lambda: gini_degree(degrees),
        "assortativity": lambda: assortativity(graph),
        "power_law_exponent": lambda: power_law_exponent(degrees),
        "triangle_count": lambda: triangle_count(graph),
        "relative_edge_entropy": lambda: relative_edge_entropy(degrees),
        "path": lambda: path_length(graph, path_length_mode, exact_threshold,
                                    sample_sources, seed),
    }
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers, thread_name_prefix="FairForge-Audit") as pool:
            futures = {name: pool.submit(job) for name, job in jobs.items()}
            results = {name: future.result() for name, future in futures.items()}
    else:
        results = {name: job() for name, job in jobs.items()}

    mean_path, unreachable = results.pop("path")
    report = AuditReport(characteristic_path_length=mean_path, unreachable_fraction=unreachable,
                         num_nodes=graph.num_nodes, num_edges=graph.num_edges, **results)
    logger.debug(f"Audit: {report.values()}")
    return report


def relative_change(before: float, after: float, floor: float = 0.0) -> float:
    """
    |after - before| / max(|before|, floor); 0 when both are zero, inf when
    the denominator is zero and after is not.
    """
    scale = max(abs(before), floor)
    if scale == 0:
        return 0.0 if after == before else float("inf")
    return abs(after - before) / scale


def diff_reports(clean: AuditReport, poisoned: AuditReport) -> Dict[str, Dict[str, float]]:
    """
    Absolute values and relative change of every statistic. Assortativity
    lies in [-1, 1]; its change is taken against max(|clean|, ASSORTATIVITY_FLOOR).
    """
    return {
        name: {
            "clean": getattr(clean, name),
            "poisoned": getattr(poisoned, name),
            "relative_change": relative_change(getattr(clean, name), getattr(poisoned, name),
                                               RELATIVE_FLOORS.get(name, 0.0)),
        }
        for name in STATISTICS
    }


def format_audit_table(clean: AuditReport,
                       rows: Sequence[Tuple[str, float, AuditReport]]) -> str:
    """One row per poisoned graph: value and relative change of each statistic."""
    short = ("Gini", "Assort.", "PowerLaw", "Triangles", "EdgeEnt.", "PathLen")
    header = f"{'graph':<14}{'rate':>7}  " + "  ".join(f"{s:>18}" for s in short)
    lines = [header, "-" * len(header)]
    values = clean.values()
    lines.append(f"{'clean':<14}{'-':>7}  " + "  ".join(
        f"{values[name]:>18.4f}" for name in STATISTICS
    ))
    for label, rate, report in rows:
        diff = diff_reports(clean, report)
        cells = [f"{diff[n]['poisoned']:>9.4f} ({100 * diff[n]['relative_change']:5.2f}%)"
                 for n in STATISTICS]
        lines.append(f"{label:<14}{100 * rate:>6.2f}%  " + "  ".join(cells))
    return "\n".join(lines)


def audit_json(clean: AuditReport, rows: Sequence[Tuple[str, float, AuditReport]],
               extra: Optional[Dict] = None) -> str:
    data: Dict = {"clean": clean.to_dict(), "poisoned": []}
    for label, rate, report in rows:
        data["poisoned"].append({
            "label": label,
            "perturbation_rate": rate,
            "report": report.to_dict(),
            "diff": diff_reports(clean, report),
        })
    if extra:
        data.update(extra)
    return json.dumps(data, indent=2, sort_keys=True)
