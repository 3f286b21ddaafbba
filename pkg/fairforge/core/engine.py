"""
FairForge Experiment Engine
===========================
Registry of experiment commands executed inside run contexts, with an
execution history, lifecycle events and a bounded worker pool for seeds.
"""

import time
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Dict, List, Optional, Sequence, TypeVar

from fairforge.core.event_bus import EventBus
from fairforge.core.execution_context import RunContext
from fairforge.utils.logger import get_logger, log_exception


T = TypeVar("T")

logger = get_logger("Engine")


def map_seeds(fn: Callable[[int], T], seeds: Sequence[int], workers: int = 1) -> List[T]:
    """
    ``fn(seed)`` for every seed, results in seed order.

    Each seed derives its own random streams, so results do not depend on
    the worker count or scheduling.
    """
    seeds = list(seeds)
    if workers <= 1 or len(seeds) <= 1:
        return [fn(seed) for seed in seeds]
    with ThreadPoolExecutor(max_workers=min(workers, len(seeds)),
                            thread_name_prefix="FairForge-Seed") as pool:
        return list(pool.map(fn, seeds))


class ExperimentEngine:
    """
    Command engine for FairForge experiments.

    Every command is a handler ``fn(ctx) -> dict`` run inside a RunContext;
    success commits the context's output directory, failure removes it.
    """

    def __init__(self, config_manager, event_bus: Optional[EventBus] = None):
        self.config_manager = config_manager
        self.event_bus = event_bus or EventBus()
        self.logger = get_logger("Engine")
        self.execution_history: List[Dict] = []
        self._command_handlers: Dict[str, Callable[[RunContext], Dict]] = {}

    def register_command(self, name: str, handler: Callable[[RunContext], Dict]):
        self._command_handlers[name] = handler
        self.logger.debug(f"Registered command: {name}")

    @property
    def commands(self) -> List[str]:
        return sorted(self._command_handlers)

    @property
    def workers(self) -> int:
        return int(self.config_manager.get("engine.workers", 1))

    def execute(self, command: str, params: Dict[str, Any] = None, out_dir=None,
                seeds: Sequence[int] = ()) -> Dict[str, Any]:
        """
        Execute a command synchronously.

        Returns:
            Execution record with status "completed" or "failed"; a failed
            record keeps the exception under "exception".
        """
        params = params or {}
        ctx = RunContext.create(command, params, self.config_manager, out_dir, seeds)
        record: Dict[str, Any] = {"id": ctx.execution_id, "command": command,
                                  "params": params, "status": "pending"}
        self.logger.info(f"[{ctx.execution_id}] Executing: {command}")
        start_time = time.time()
        try:
            handler = self._command_handlers.get(command)
            if handler is None:
                raise ValueError(f"Unknown command: {command}")
            with ctx:
                result = handler(ctx)
            record["status"] = "completed"
            record["result"] = result
            self.logger.info(f"[{ctx.execution_id}] Completed in {time.time() - start_time:.2f}s")
            self.event_bus.emit("command_completed", ctx.execution_id, command, result)
        except Exception as e:
            record["status"] = "failed"
            record["error"] = str(e)
            record["exception"] = e
            log_exception(self.logger, f"[{ctx.execution_id}] {command} failed", e)
            self.event_bus.emit("command_failed", ctx.execution_id, command, str(e))
        finally:
            record["elapsed_ms"] = int((time.time() - start_time) * 1000)
            self.execution_history.append(record)
        return record

    def get_history(self, limit: int = 50) -> List[Dict]:
        return self.execution_history[-limit:]
