"""
FairForge Configuration Manager
===============================
Dot-notation experiment configuration: defaults, YAML files, command-line
overrides, validation with field paths, and a stable configuration hash.
"""

import hashlib
import json
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Optional, Union

import yaml

from fairforge.utils.logger import get_logger


class ConfigError(ValueError):
    """Raised for invalid configuration; ``errors`` lists every offending field path."""

    def __init__(self, message: str, errors: Iterable[str]):
        self.errors = list(errors)
        super().__init__(f"{message}: " + "; ".join(self.errors))


Validator = Callable[['ConfigManager'], List[str]]

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")
PATH_LENGTH_MODES = ("auto", "exact", "sampled")
SWEEP_PARAMS = ("alpha", "beta", "budget_rate", "k_percent")


def parse_value(value: str) -> Any:
    """
    Parse an override value into bool, int, float, list, None or string.

    YAML scalars cover most cases; exponent floats without a dot (1e-3) are
    strings to YAML and are retried as floats.
    """
    try:
        parsed = yaml.safe_load(value)
    except yaml.YAMLError:
        return value
    if isinstance(parsed, str):
        try:
            return float(parsed)
        except ValueError:
            return parsed
    if isinstance(parsed, list):
        return [parse_value(item) if isinstance(item, str) else item for item in parsed]
    return parsed


def flatten(nested: Dict[str, Any], prefix: str = "") -> Dict[str, Any]:
    """{"attack": {"alpha": 1}} -> {"attack.alpha": 1}"""
    flat = {}
    for key, value in nested.items():
        full_key = f"{prefix}.{key}" if prefix else str(key)
        if isinstance(value, dict):
            flat.update(flatten(value, full_key))
        else:
            flat[full_key] = value
    return flat


def unflatten(flat: Dict[str, Any]) -> Dict[str, Any]:
    nested: Dict[str, Any] = {}
    for key, value in flat.items():
        node = nested
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value
    return nested


class ConfigManager:
    """
    Configuration for one experiment.

    Features:
    - Flat dot-notation keys over nested YAML sections
    - Defaults for every key; unknown keys are validation errors
    - ``key=value`` overrides with typed parsing
    - Field-path validation plus pluggable section validators
    - Change notification through the event bus
    """

    DEFAULTS = {
        # Synthetic benchmark
        "generate.n": 600,
        "generate.num_classes": 2,
        "generate.num_features": 16,
        "generate.p_in": 0.03,
        "generate.p_out": 0.005,
        "generate.bias": 0.3,
        "generate.feature_sep": 1.0,
        "generate.sensitive_signal": 0.5,
        "generate.seed": 0,
        "generate.split": [0.5, 0.25, 0.25],
        "generate.feature_format": "csv",

        # Attack
        "attack.node_budget": None,
        "attack.degree_budget": None,
        "attack.budget_rate": 0.01,
        "attack.k_percent": 0.5,
        "attack.alpha": 0.01,
        "attack.beta": 4.0,
        "attack.lr_surrogate": 0.001,
        "attack.lr_feature": 0.001,
        "attack.max_iter": 20,
        "attack.max_step": 50,
        "attack.samples": 20,
        "attack.keep_prob": 0.5,
        "attack.seed": 0,
        "attack.discrete_features": False,
        "attack.init_strategy": "uniform",
        "attack.init_noise": 0.01,
        "attack.hidden": 128,
        "attack.eo_form": "summed",
        "attack.bayes_epochs": 200,

        # Victim retraining
        "victim.kind": "gcn",
        "victim.hidden": 128,
        "victim.lr": 0.001,
        "victim.max_epochs": 500,
        "victim.patience": 30,
        "victim.sgc_hops": 2,
        "victim.seeds": [0, 1, 2, 3, 4],

        # Uncertainty-masking defense
        "defense.etas": [0.0, 0.1, 0.2, 0.3, 0.4, 0.5],

        # Structural audit
        "audit.path_length_mode": "auto",
        "audit.exact_threshold": 5000,
        "audit.sample_sources": 1000,

        # Hyper-parameter sweep
        "sweep.param": "alpha",
        "sweep.values": None,

        # Execution
        "engine.workers": 1,

        # Logging
        "logging.level": "INFO",
        "logging.file": None,
    }

    def __init__(self, event_bus=None, config_file: Union[str, Path, None] = None,
                 overrides: Optional[Iterable[str]] = None):
        self.event_bus = event_bus
        self.logger = get_logger("ConfigManager")
        self._config: Dict[str, Any] = dict(self.DEFAULTS)
        self._unknown: List[str] = []
        self._subscribers: Dict[str, List[Callable]] = {}
        self._validators: List[Validator] = []
        self.source: Optional[Path] = None

        if config_file:
            self.load_file(config_file)
        if overrides:
            self.apply_overrides(overrides)

        self.logger.debug(f"ConfigManager initialized with {len(self._config)} settings")

    def load_file(self, path: Union[str, Path]):
        """Merge a YAML file of nested sections into the configuration."""
        path = Path(path)
        if not path.exists():
            raise ConfigError("config file not found", [str(path)])
        try:
            data = yaml.safe_load(path.read_text()) or {}
        except yaml.YAMLError as e:
            raise ConfigError("config file is not valid YAML", [f"{path}: {e}"])
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a mapping", [str(path)])
        for key, value in flatten(data).items():
            self._store(key, value)
        self.source = path
        self.logger.info(f"Loaded config from {path}")

    def apply_overrides(self, overrides: Iterable[str]):
        """Apply ``section.key=value`` overrides."""
        errors = []
        for item in overrides:
            if "=" not in item:
                errors.append(f"{item}: override must look like section.key=value")
                continue
            key, value = item.split("=", 1)
            self._store(key.strip(), parse_value(value.strip()))
        if errors:
            raise ConfigError("invalid overrides", errors)

    def _store(self, key: str, value: Any):
        if key not in self.DEFAULTS:
            if key not in self._unknown:
                self._unknown.append(key)
            return
        self.set(key, value)

    def get(self, key: str, default: Any = None) -> Any:
        return self._config.get(key, default)

    def set(self, key: str, value: Any, notify: bool = True):
        """
        Set a value and notify subscribers when it changed.

        Args:
            key: Dot-notation key
            value: New value
            notify: Whether to notify subscribers
        """
        old_value = self._config.get(key)
        self._config[key] = value
        self.logger.debug(f"Config set: {key} = {value}")
        if notify and old_value != value:
            self._notify_subscribers(key, value)
            if self.event_bus is not None:
                self.event_bus.emit("config_changed", key, value)

    def get_section(self, prefix: str, strip: bool = False) -> Dict[str, Any]:
        """All values under ``prefix``; with ``strip`` the keys lose the prefix."""
        prefix_dot = prefix + "."
        return {
            (k[len(prefix_dot):] if strip else k): v
            for k, v in self._config.items() if k.startswith(prefix_dot)
        }

    def subscribe(self, key: str, callback: Callable):
        """Watch one key, or a whole section with ``section.*``."""
        self._subscribers.setdefault(key, []).append(callback)

    def _notify_subscribers(self, key: str, value: Any):
        patterns = [key, key.split(".")[0] + ".*"]
        for pattern in patterns:
            for callback in self._subscribers.get(pattern, []):
                try:
                    callback(key, value)
                except Exception as e:
                    self.logger.error(f"Subscriber error for {pattern}: {e}")

    def add_validator(self, validator: Validator):
        """Register a section validator returning field-path errors."""
        self._validators.append(validator)

    def validate(self) -> List[str]:
        """
        Validate configuration.

        Returns:
            List of field-path errors (empty if valid)
        """
        errors = [f"{key}: unknown configuration key" for key in self._unknown]
        errors.extend(self._type_errors())
        if errors:
            return errors

        get = self.get
        if get("generate.n") < 50:
            errors.append("generate.n: must be >= 50")
        if get("generate.num_classes") < 2:
            errors.append("generate.num_classes: must be >= 2")
        if get("generate.num_features") < 2:
            errors.append("generate.num_features: must be >= 2")
        if not 0 <= get("generate.p_out") <= get("generate.p_in") <= 1:
            errors.append("generate.p_in: need 0 <= p_out <= p_in <= 1")
        if not 0 <= get("generate.bias") <= 1:
            errors.append("generate.bias: must be in [0, 1]")
        ratios = get("generate.split")
        numeric = all(isinstance(r, (int, float)) for r in ratios)
        if not numeric or len(ratios) != 3 or min(ratios) < 0 or abs(sum(ratios) - 1.0) > 1e-9:
            errors.append("generate.split: need three non-negative ratios summing to 1")
        if get("generate.feature_format") not in ("csv", "bin"):
            errors.append("generate.feature_format: must be 'csv' or 'bin'")

        if get("victim.kind") not in ("gcn", "sgc"):
            errors.append(f"victim.kind: must be 'gcn' or 'sgc', got '{get('victim.kind')}'")
        for key in ("victim.hidden", "victim.patience", "victim.sgc_hops"):
            if get(key) < 1:
                errors.append(f"{key}: must be >= 1")
        if get("victim.max_epochs") < 0:
            errors.append("victim.max_epochs: must be >= 0")
        if not get("victim.lr") > 0:
            errors.append("victim.lr: must be > 0")
        seeds = get("victim.seeds")
        if not seeds or not all(isinstance(s, int) and not isinstance(s, bool) for s in seeds):
            errors.append("victim.seeds: need a non-empty list of integers")

        etas = get("defense.etas")
        if not etas or not all(isinstance(eta, (int, float)) and 0 <= eta <= 1 for eta in etas):
            errors.append("defense.etas: every eta must lie in [0, 1]")

        if get("audit.path_length_mode") not in PATH_LENGTH_MODES:
            errors.append(f"audit.path_length_mode: must be one of {PATH_LENGTH_MODES}")
        for key in ("audit.exact_threshold", "audit.sample_sources", "engine.workers"):
            if get(key) < 1:
                errors.append(f"{key}: must be >= 1")
        if get("sweep.param") not in SWEEP_PARAMS:
            errors.append(f"sweep.param: must be one of {SWEEP_PARAMS}")
        if str(get("logging.level")).upper() not in LOG_LEVELS:
            errors.append(f"logging.level: must be one of {LOG_LEVELS}")

        for validator in self._validators:
            errors.extend(validator(self))
        return errors

    def _type_errors(self) -> List[str]:
        errors = []
        for key, default in self.DEFAULTS.items():
            value = self._config[key]
            if default is None:
                if key == "sweep.values" and value is not None and not isinstance(value, list):
                    errors.append(f"{key}: expected a list, got {value!r}")
                continue
            if value is None:
                errors.append(f"{key}: must not be null")
            elif isinstance(default, bool):
                if not isinstance(value, bool):
                    errors.append(f"{key}: expected a boolean, got {value!r}")
            elif isinstance(default, int):
                if isinstance(value, bool) or not isinstance(value, int):
                    errors.append(f"{key}: expected an integer, got {value!r}")
            elif isinstance(default, float):
                if isinstance(value, bool) or not isinstance(value, (int, float)):
                    errors.append(f"{key}: expected a number, got {value!r}")
            elif isinstance(default, list):
                if not isinstance(value, list):
                    errors.append(f"{key}: expected a list, got {value!r}")
            elif isinstance(default, str) and not isinstance(value, str):
                errors.append(f"{key}: expected a string, got {value!r}")
        return errors

    def require_valid(self):
        errors = self.validate()
        if errors:
            raise ConfigError("invalid configuration", errors)

    def export_config(self) -> Dict[str, Any]:
        return dict(self._config)

    def nested(self) -> Dict[str, Any]:
        return unflatten(self._config)

    def config_hash(self) -> str:
        """sha256 of the canonical JSON of the effective configuration."""
        canonical = json.dumps(self._config, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def dump(self, path: Union[str, Path]):
        Path(path).write_text(yaml.safe_dump(self.nested(), sort_keys=True))

    def __getitem__(self, key: str) -> Any:
        return self.get(key)

    def __setitem__(self, key: str, value: Any):
        self.set(key, value)

    def __contains__(self, key: str) -> bool:
        return key in self._config
