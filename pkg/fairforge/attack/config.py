"""
Attack configuration.

Defaults: alpha=0.01, beta=4,
k=0.5, max_step=50, max_iter=20, learning rates 0.001, T=20 Bayesian samples.
When unset, the node budget is 1% of the labeled nodes and the degree budget
is the average clean degree.
"""

import math
from dataclasses import asdict, dataclass, fields, replace
from enum import Enum
from typing import Any, Dict, List, Optional

from fairforge.graph.graph import Graph
from fairforge.models.losses import EOForm


class AttackVariant(Enum):
    """Full attack and its three ablations."""
    FULL = "full"
    RANDOM_TARGETS = "random-targets"
    MIXED_GROUPS = "mixed-groups"
    FROZEN_SURROGATE = "frozen-surrogate"

    @classmethod
    def parse(cls, value) -> 'AttackVariant':
        if isinstance(value, cls):
            return value
        text = str(value).strip().lower()
        aliases = {"u": cls.RANDOM_TARGETS, "h": cls.MIXED_GROUPS, "i": cls.FROZEN_SURROGATE}
        if text in aliases:
            return aliases[text]
        return cls(text)


class InitStrategy(Enum):
    UNIFORM = "uniform"
    TARGET_MEAN = "target_mean"


@dataclass
class AttackConfig:
    """Every knob of one attack run."""

    node_budget: Optional[int] = None
    degree_budget: Optional[int] = None
    budget_rate: float = 0.01
    k_percent: float = 0.5
    alpha: float = 0.01
    beta: float = 4.0
    lr_surrogate: float = 0.001
    lr_feature: float = 0.001
    max_iter: int = 20
    max_step: int = 50
    samples: int = 20
    keep_prob: float = 0.5
    seed: int = 0
    discrete_features: bool = False
    init_strategy: str = InitStrategy.UNIFORM.value
    init_noise: float = 0.01
    hidden: int = 128
    eo_form: str = EOForm.SUMMED.value
    bayes_epochs: int = 200

    def validate(self) -> List[str]:
        """Field-path errors; empty when valid."""
        errors = []
        for name in ("node_budget", "degree_budget"):
            value = getattr(self, name)
            integer = isinstance(value, int) and not isinstance(value, bool)
            if value is not None and (not integer or value < 1):
                errors.append(f"attack.{name}: must be a positive integer, got {value}")
        if not 0 < self.budget_rate:
            errors.append(f"attack.budget_rate: must be > 0, got {self.budget_rate}")
        if not 0 < self.k_percent <= 1:
            errors.append(f"attack.k_percent: must be in (0, 1], got {self.k_percent}")
        for name in ("alpha", "beta"):
            if getattr(self, name) < 0:
                errors.append(f"attack.{name}: must be >= 0, got {getattr(self, name)}")
        for name in ("lr_surrogate", "lr_feature"):
            if not getattr(self, name) > 0:
                errors.append(f"attack.{name}: must be > 0, got {getattr(self, name)}")
        for name in ("max_iter", "max_step", "bayes_epochs"):
            if getattr(self, name) < 0:
                errors.append(f"attack.{name}: must be >= 0, got {getattr(self, name)}")
        for name in ("samples", "hidden"):
            if getattr(self, name) < 1:
                errors.append(f"attack.{name}: must be >= 1, got {getattr(self, name)}")
        if not 0 < self.keep_prob <= 1:
            errors.append(f"attack.keep_prob: must be in (0, 1], got {self.keep_prob}")
        if self.init_noise < 0:
            errors.append(f"attack.init_noise: must be >= 0, got {self.init_noise}")
        if self.init_strategy not in {s.value for s in InitStrategy}:
            errors.append(f"attack.init_strategy: unknown strategy '{self.init_strategy}'")
        if self.eo_form not in {f.value for f in EOForm}:
            errors.append(f"attack.eo_form: must be 'summed' or 'vector', got '{self.eo_form}'")
        return errors

    def resolve_budgets(self, clean: Graph) -> 'AttackConfig':
        """Copy with node/degree budgets filled in from the clean graph."""
        b = self.node_budget
        if b is None:
            b = max(1, int(round(self.budget_rate * len(clean.labeled_nodes()))))
        d = self.degree_budget
        if d is None:
            mean_degree = clean.degrees().mean() if clean.num_nodes else 0.0
            d = max(1, int(math.floor(mean_degree + 0.5)))
        return replace(self, node_budget=int(b), degree_budget=int(d))

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, values: Dict[str, Any]) -> 'AttackConfig':
        """Build from a mapping; keys may carry an ``attack.`` prefix, unknown keys are ignored."""
        known = {f.name for f in fields(cls)}
        cleaned = {}
        for key, value in values.items():
            name = key[len("attack."):] if key.startswith("attack.") else key
            if name in known:
                cleaned[name] = value
        return cls(**cleaned)
