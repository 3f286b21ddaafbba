"""
FairForge Core
==============
Configuration, events, run contexts and the experiment engine.
"""

from .config_manager import ConfigError, ConfigManager
from .event_bus import Event, EventBus
from .execution_context import ExecutionError, RunContext
from .engine import ExperimentEngine, map_seeds

__all__ = ['ConfigError', 'ConfigManager', 'Event', 'EventBus', 'ExecutionError',
           'RunContext', 'ExperimentEngine', 'map_seeds']
