"""
FairForge Evaluation
====================
Fairness metrics, victim retraining, the uncertainty-masking defense and
structural audits.
"""

from .metrics import (
    MetricsError,
    MetricsReport,
    SeedMetrics,
    accuracy,
    delta_eo,
    delta_sp,
    format_table,
)
from .victim import VictimConfig, evaluate_victim
from .defense import DefenseError, DefenseSweep, defend_mask, defense_sweep
from .audit import AuditError, AuditReport, diff_reports, graph_statistics

__all__ = [
    'MetricsError', 'MetricsReport', 'SeedMetrics', 'accuracy', 'delta_eo', 'delta_sp',
    'format_table', 'VictimConfig', 'evaluate_victim', 'DefenseError', 'DefenseSweep',
    'defend_mask', 'defense_sweep', 'AuditError', 'AuditReport', 'diff_reports',
    'graph_statistics',
]
