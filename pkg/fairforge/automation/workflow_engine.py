"""
FairForge Pipelines
===================
Declarative multi-step experiments: steps name a command, its parameters
and output directory, and the steps they depend on. ``${var}`` references
are replaced from the pipeline variables and ``${steps.<id>.out}`` from the
output directory of an earlier step. A failed step skips its dependents;
independent steps still run.
"""

import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import yaml

from fairforge.utils.logger import get_logger


PLACEHOLDER = re.compile(r"\$\{([A-Za-z0-9_.\-]+)\}")


class PipelineError(ValueError):
    """Raised for malformed pipeline definitions or unresolved variables."""


class StepStatus(Enum):
    """Pipeline step status."""
    PENDING = "pending"
    RUNNING = "running"
    SUCCESS = "success"
    FAILED = "failed"
    SKIPPED = "skipped"


@dataclass
class PipelineStep:
    """A single step in a pipeline."""
    id: str
    command: str
    params: Dict[str, Any] = field(default_factory=dict)
    out: Optional[str] = None
    depends_on: List[str] = field(default_factory=list)

    # Runtime state
    status: StepStatus = StepStatus.PENDING
    result: Any = None
    error: Optional[str] = None
    resolved_out: Optional[str] = None


@dataclass
class PipelineDefinition:
    """Definition of a complete pipeline."""
    id: str
    steps: List[PipelineStep]
    description: str = ""
    variables: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        ids = [step.id for step in self.steps]
        duplicates = sorted({i for i in ids if ids.count(i) > 1})
        if duplicates:
            raise PipelineError(f"duplicate step ids: {duplicates}")
        for step in self.steps:
            unknown = [dep for dep in step.depends_on if dep not in ids]
            if unknown:
                raise PipelineError(f"step '{step.id}' depends on unknown steps {unknown}")
        self._check_acyclic()

    def _check_acyclic(self):
        deps = {step.id: list(step.depends_on) for step in self.steps}
        visiting, done = set(), set()

        def visit(node: str):
            if node in done:
                return
            if node in visiting:
                raise PipelineError(f"dependency cycle through step '{node}'")
            visiting.add(node)
            for dep in deps[node]:
                visit(dep)
            visiting.discard(node)
            done.add(node)

        for node in deps:
            visit(node)

    @classmethod
    def from_dict(cls, data: Dict) -> 'PipelineDefinition':
        """Create a pipeline from a dictionary."""
        if not isinstance(data, dict) or "steps" not in data:
            raise PipelineError("a pipeline needs a 'steps' list")
        steps = []
        for step_data in data["steps"]:
            if "id" not in step_data or "command" not in step_data:
                raise PipelineError(f"every step needs 'id' and 'command': {step_data}")
            steps.append(PipelineStep(
                id=step_data["id"],
                command=step_data["command"],
                params=step_data.get("params", {}) or {},
                out=step_data.get("out"),
                depends_on=list(step_data.get("depends_on", []) or []),
            ))
        return cls(
            id=data.get("id", "pipeline"),
            steps=steps,
            description=data.get("description", ""),
            variables=data.get("variables", {}) or {},
        )

    @classmethod
    def from_yaml(cls, yaml_content: str) -> 'PipelineDefinition':
        return cls.from_dict(yaml.safe_load(yaml_content))

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> 'PipelineDefinition':
        return cls.from_yaml(Path(path).read_text())


BENCHMARK_PIPELINE = """
id: benchmark
description: Clean vs. poisoned protocol on the synthetic benchmark
variables:
  root: runs/benchmark
steps:
  - id: generate
    command: generate
    out: ${root}/clean
  - id: attack
    command: attack
    params: {graph: "${steps.generate.out}"}
    out: ${root}/poisoned
    depends_on: [generate]
  - id: evaluate
    command: evaluate
    params: {graph: "${steps.attack.out}", baseline: "${steps.generate.out}"}
    out: ${root}/evaluate
    depends_on: [attack]
  - id: audit
    command: audit
    params: {clean: "${steps.generate.out}", poisoned: ["${steps.attack.out}"]}
    out: ${root}/audit
    depends_on: [attack]
  - id: defend
    command: defend
    params: {graph: "${steps.attack.out}"}
    out: ${root}/defend
    depends_on: [attack]
"""


class PipelineRun:
    """A single execution of a pipeline."""

    def __init__(self, pipeline: PipelineDefinition, variables: Optional[Dict] = None):
        self.pipeline = pipeline
        self.status = "pending"
        self.variables = {**pipeline.variables, **(variables or {})}
        for step in pipeline.steps:
            step.status = StepStatus.PENDING
            step.result = None
            step.error = None
            step.resolved_out = None

    def _get_step(self, step_id: str) -> PipelineStep:
        return next(step for step in self.pipeline.steps if step.id == step_id)

    def get_ready_steps(self) -> List[PipelineStep]:
        """Pending steps whose dependencies all succeeded."""
        return [
            step for step in self.pipeline.steps
            if step.status is StepStatus.PENDING
            and all(self._get_step(dep).status is StepStatus.SUCCESS for dep in step.depends_on)
        ]

    def is_success(self) -> bool:
        return all(step.status is StepStatus.SUCCESS for step in self.pipeline.steps)

    def resolve(self, value: Any) -> Any:
        """Substitute ``${...}`` placeholders in strings, lists and mappings."""
        if isinstance(value, dict):
            return {k: self.resolve(v) for k, v in value.items()}
        if isinstance(value, list):
            return [self.resolve(v) for v in value]
        if not isinstance(value, str):
            return value

        def lookup(match: 're.Match') -> str:
            name = match.group(1)
            if name.startswith("steps."):
                parts = name.split(".")
                if len(parts) == 3 and parts[2] == "out":
                    out = self._get_step(parts[1]).resolved_out
                    if out is not None:
                        return out
                raise PipelineError(f"cannot resolve ${{{name}}}")
            if name not in self.variables:
                raise PipelineError(f"undefined variable ${{{name}}}")
            return str(self.variables[name])

        return PLACEHOLDER.sub(lookup, value)

    def summary(self) -> List[Dict[str, Any]]:
        return [{"id": s.id, "command": s.command, "status": s.status.value,
                 "out": s.resolved_out, "error": s.error} for s in self.pipeline.steps]


class WorkflowEngine:
    """
    Pipeline execution on top of the experiment engine.

    Features:
    - Dependency resolution in declaration order
    - Variable interpolation without expression evaluation
    - Dependents of a failed step are skipped
    """

    def __init__(self, engine, event_bus=None):
        self.engine = engine
        self.event_bus = event_bus or engine.event_bus
        self.logger = get_logger("Pipeline")

    def run(self, pipeline: PipelineDefinition, variables: Optional[Dict] = None) -> PipelineRun:
        """Execute every step whose dependencies succeed; returns the finished run."""
        run = PipelineRun(pipeline, variables)
        run.status = "running"
        self.logger.info(f"Starting pipeline: {pipeline.id} ({len(pipeline.steps)} steps)")
        self.event_bus.emit("pipeline_started", pipeline.id)

        while True:
            ready = run.get_ready_steps()
            if not ready:
                break
            for step in ready:
                self._execute_step(run, step)

        for step in pipeline.steps:
            if step.status is StepStatus.PENDING:
                step.status = StepStatus.SKIPPED
                self.logger.warning(f"Skipped step {step.id}: a dependency failed")

        run.status = "success" if run.is_success() else "failed"
        self.logger.info(f"Pipeline {pipeline.id} finished: {run.status}")
        self.event_bus.emit("pipeline_completed", pipeline.id, run.status)
        return run

    def _execute_step(self, run: PipelineRun, step: PipelineStep):
        self.logger.info(f"Executing step: {step.id} ({step.command})")
        step.status = StepStatus.RUNNING
        try:
            params = run.resolve(step.params)
            out = run.resolve(step.out) if step.out else None
        except PipelineError as e:
            step.status = StepStatus.FAILED
            step.error = str(e)
            self.logger.error(f"Step {step.id}: {e}")
            return

        record = self.engine.execute(step.command, params, out_dir=out)
        if record["status"] == "completed":
            step.status = StepStatus.SUCCESS
            step.result = record.get("result")
            step.resolved_out = out
        else:
            step.status = StepStatus.FAILED
            step.error = record.get("error", "unknown error")
        self.event_bus.emit("pipeline_step_completed", run.pipeline.id, step.id,
                            step.status.value)
