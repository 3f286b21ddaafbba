"""
FairForge Automation
====================
Declarative experiment pipelines.
"""

from .workflow_engine import (
    BENCHMARK_PIPELINE,
    PipelineDefinition,
    PipelineError,
    PipelineRun,
    StepStatus,
    WorkflowEngine,
)

__all__ = ['BENCHMARK_PIPELINE', 'PipelineDefinition', 'PipelineError', 'PipelineRun',
           'StepStatus', 'WorkflowEngine']
