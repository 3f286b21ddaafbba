"""
FairForge Attack
================
Uncertainty-guided node injection with fairness-targeted feature optimization.
"""

from .config import AttackConfig, AttackVariant, InitStrategy
from .uncertainty import (
    UncertaintyError,
    UncertaintyReport,
    estimate_uncertainty,
    sample_masks,
    select_targets,
    train_bayesian,
)
from .injection import build_plan, init_features, random_targets
from .optimizer import AttackAbortedError, AttackLog, AttackResult, run_ablation, run_attack
from .validation import validate_poisoned

__all__ = [
    'AttackConfig', 'AttackVariant', 'InitStrategy', 'UncertaintyError', 'UncertaintyReport',
    'estimate_uncertainty', 'sample_masks', 'select_targets', 'train_bayesian', 'build_plan',
    'init_features', 'random_targets', 'AttackAbortedError', 'AttackLog', 'AttackResult',
    'run_ablation', 'run_attack', 'validate_poisoned',
]
