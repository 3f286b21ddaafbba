"""
FairForge Run Context
=====================
One command execution writing into one output directory.

Artifacts are written to a hidden staging directory next to the target and
moved into place with a single rename once the command succeeds; a failed
command leaves no partial output behind. Every committed directory carries
``manifest.json`` (command, config hash, effective config, seeds, package
versions, artifact digests) with no timestamps, so identical runs produce
identical manifests.
"""

import hashlib
import json
import os
import platform
import shutil
import uuid
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from fairforge.utils.logger import get_logger


MANIFEST_FILE = "manifest.json"
VERSIONED_PACKAGES = ("numpy", "scipy", "networkx", "PyYAML")


class ExecutionError(Exception):
    """Raised when a command fails inside its run context."""


def package_versions() -> Dict[str, str]:
    versions = {"python": platform.python_version()}
    for name in ("fairforge",) + VERSIONED_PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = "unknown"
    if versions["fairforge"] == "unknown":
        from fairforge import __version__
        versions["fairforge"] = __version__
    return versions


def file_digest(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, Path):
        return str(value)
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    return value


@dataclass
class RunContext:
    """
    Execution context for command handlers.

    Provides:
    - Command parameters and configuration
    - Staged artifact writing with atomic commit
    - The run manifest
    - Logging
    """

    execution_id: str
    command: str
    params: Dict[str, Any]
    config: Any  # ConfigManager
    out_dir: Optional[Path] = None
    seeds: List[int] = field(default_factory=list)

    status: str = "running"
    logs: List[str] = field(default_factory=list)
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.logger = get_logger(f"Run-{self.command}")
        self.staging: Optional[Path] = None
        if self.out_dir is not None:
            self.out_dir = Path(self.out_dir)
            self.staging = self.out_dir.parent / f".{self.out_dir.name}.staging-{self.execution_id}"

    @classmethod
    def create(cls, command: str, params: Dict[str, Any], config: Any,
               out_dir=None, seeds=None) -> 'RunContext':
        return cls(execution_id=uuid.uuid4().hex[:8], command=command, params=params,
                   config=config, out_dir=out_dir, seeds=list(seeds or []))

    def __enter__(self) -> 'RunContext':
        if self.staging is not None:
            self.staging.mkdir(parents=True, exist_ok=False)
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            self.commit()
        else:
            self.abort(str(exc))
        return False

    def log(self, message: str, level: str = "info"):
        self.logs.append(f"[{level.upper()}] {message}")
        getattr(self.logger, level.lower(), self.logger.info)(message)

    def get_param(self, key: str, default: Any = None) -> Any:
        value = self.params.get(key)
        return default if value is None else value

    def get_config(self, key: str, default: Any = None) -> Any:
        if self.config is not None:
            return self.config.get(key, default)
        return default

    @property
    def workdir(self) -> Path:
        """Staging directory the command writes into."""
        if self.staging is None:
            raise ExecutionError(f"command '{self.command}' has no output directory")
        return self.staging

    def path(self, name: str) -> Path:
        """Staging path for an artifact (parent directories created)."""
        target = self.workdir / name
        target.parent.mkdir(parents=True, exist_ok=True)
        return target

    def write_json(self, name: str, data: Any) -> Path:
        target = self.path(name)
        target.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")
        return target

    def write_text(self, name: str, text: str) -> Path:
        target = self.path(name)
        target.write_text(text if text.endswith("\n") else text + "\n")
        return target

    def fail(self, error: str):
        """Mark execution as failed."""
        self.status = "failed"
        self.log(error, "error")
        raise ExecutionError(error)

    def artifacts(self) -> Dict[str, str]:
        if self.staging is None or not self.staging.exists():
            return {}
        return {
            str(p.relative_to(self.staging)): file_digest(p)
            for p in sorted(self.staging.rglob("*"))
            if p.is_file() and p.name != MANIFEST_FILE
        }

    def manifest(self) -> Dict[str, Any]:
        config = self.config
        return _jsonable({
            "command": self.command,
            "params": self.params,
            "config_hash": config.config_hash() if config is not None else None,
            "config": config.nested() if config is not None else {},
            "seeds": self.seeds,
            "versions": package_versions(),
            "artifacts": self.artifacts(),
            "metadata": self.metadata,
        })

    def commit(self):
        """Write the manifest and move the staged directory into place."""
        self.status = "completed"
        if self.staging is None:
            return
        (self.staging / MANIFEST_FILE).write_text(
            json.dumps(self.manifest(), indent=2, sort_keys=True) + "\n"
        )
        if self.out_dir.exists():
            shutil.rmtree(self.out_dir)
        os.replace(self.staging, self.out_dir)
        self.log(f"Wrote {self.out_dir}")

    def abort(self, reason: str = ""):
        """Drop every staged artifact."""
        self.status = "failed"
        if self.staging is not None and self.staging.exists():
            shutil.rmtree(self.staging)
        if reason:
            self.logger.debug(f"Aborted {self.command}: {reason}")
