"""
FairForge Graph Package
=======================
Attributed graphs, injection plans, splits, synthetic generation and file IO.
"""

from .graph import (
    UNLABELED,
    Graph,
    GraphError,
    HomophilyChange,
    InjectionPlan,
    PlanViolationError,
    Split,
    UndefinedHomophilyError,
    apply_plan,
    homophily_delta_report,
    node_homophily,
    perturbation_rate,
)
from .splits import make_split
from .generator import SBMConfig, generate_sbm
from .io import GraphBundle, load_graph, load_graph_dir, save_graph

__all__ = [
    'UNLABELED', 'Graph', 'GraphError', 'HomophilyChange', 'InjectionPlan',
    'PlanViolationError', 'Split', 'UndefinedHomophilyError', 'apply_plan',
    'homophily_delta_report', 'node_homophily', 'perturbation_rate', 'make_split',
    'SBMConfig', 'generate_sbm', 'GraphBundle', 'load_graph', 'load_graph_dir', 'save_graph',
]
