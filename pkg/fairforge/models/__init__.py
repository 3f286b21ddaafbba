"""
FairForge Models
================
Framework-free GCN/SGC with exact gradients, losses and training.
"""

from .gcn import (
    Gradients,
    ModelKind,
    ModelParams,
    ModelShapeError,
    WeightMasks,
    backward,
    forward,
    init_params,
    normalize_adjacency,
    predict_proba,
)
from .losses import (
    EOForm,
    LossError,
    LossSpec,
    LossTerms,
    loss_ce,
    loss_cf,
    loss_eo,
    loss_sp,
    total_loss,
)
from .training import AdamOptimizer, TrainingError, accuracy, train
from .checkpoint import load_params, save_params

__all__ = [
    'Gradients', 'ModelKind', 'ModelParams', 'ModelShapeError', 'WeightMasks', 'backward',
    'forward', 'init_params', 'normalize_adjacency', 'predict_proba', 'EOForm', 'LossError',
    'LossSpec', 'LossTerms', 'loss_ce', 'loss_cf', 'loss_eo', 'loss_sp', 'total_loss',
    'AdamOptimizer', 'TrainingError', 'accuracy', 'train',
    'load_params', 'save_params',
]
