"""
FairForge Attack Optimizer
==========================
Node-injection fairness attack:

1. train a Bayesian GCN and rank labeled nodes by predictive uncertainty
2. pick the top-k% of each sensitive group as targets
3. inject b nodes split across the groups, each wired to <= d same-group targets
4. pretrain the surrogate on the clean graph, then alternate surrogate
   cross-entropy steps on the poisoned graph with Adam steps on the injected
   features under  CE + alpha * CF + beta * (SP + EO); the feature moments
   restart after every clamp
5. clamp injected features to the clean column bounds after every outer
   iteration, and round them once at the end for discrete datasets
"""

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from fairforge.attack import uncertainty
from fairforge.attack.config import AttackConfig, AttackVariant
from fairforge.attack.injection import (
    build_plan,
    clamp_features,
    init_features,
    random_targets,
    round_features,
)
from fairforge.attack.uncertainty import UncertaintyReport, selection_size
from fairforge.core.config_manager import ConfigError
from fairforge.core.event_bus import EventBus
from fairforge.graph.graph import Graph, InjectionPlan, Split, apply_plan
from fairforge.models.gcn import ModelKind, ModelParams, backward, init_params, normalize_adjacency
from fairforge.models.losses import LossSpec, LossTerms
from fairforge.models.training import AdamOptimizer, TrainingError, train
from fairforge.utils.logger import get_logger
from fairforge.utils.rng import derive_rng, derive_seed


logger = get_logger("Attack")

STEP_EVENT = "attack.step"
LOG_COLUMNS = ("iter", "step", "phase", "L_CE", "L_SP", "L_EO", "L_CF", "L_total")


class AttackAbortedError(RuntimeError):
    """Raised when the attack cannot continue; carries the last finite state."""

    def __init__(self, message: str, plan: Optional[InjectionPlan] = None,
                 iteration: Optional[int] = None, step: Optional[int] = None):
        self.plan = plan
        self.iteration = iteration
        self.step = step
        where = "" if iteration is None else f" at iteration {iteration}, step {step}"
        super().__init__(f"{message}{where}")


class AttackLog:
    """Per-step loss components, collected from ``attack.step`` events."""

    def __init__(self):
        self.rows: List[Tuple] = []

    def record(self, iteration: int, step: int, phase: str, terms: LossTerms):
        self.rows.append((iteration, step, phase, terms.ce, terms.sp, terms.eo,
                          terms.cf, terms.total))

    def attach(self, bus: EventBus) -> 'AttackLog':
        bus.subscribe(STEP_EVENT, self.record)
        return self

    def detach(self, bus: EventBus):
        bus.unsubscribe(STEP_EVENT, self.record)

    def to_csv(self, path: Union[str, Path]):
        lines = [",".join(LOG_COLUMNS)]
        for row in self.rows:
            head = f"{row[0]},{row[1]},{row[2]}"
            lines.append(head + "," + ",".join(f"{value:.17g}" for value in row[3:]))
        Path(path).write_text("\n".join(lines) + "\n")

    def __len__(self) -> int:
        return len(self.rows)


@dataclass
class AttackResult:
    """Everything one attack run produces."""

    poisoned: Graph
    plan: InjectionPlan
    log: AttackLog
    config: AttackConfig
    variant: AttackVariant
    surrogate: ModelParams
    bayesian: Optional[ModelParams] = None
    report: Optional[UncertaintyReport] = None
    info: Dict = field(default_factory=dict)


def _check_groups(clean: Graph, split: Split):
    groups = clean.sensitive[split.train]
    for group in (0, 1):
        if not (groups == group).any():
            raise AttackAbortedError(f"training split has no node of sensitive group {group}")


def _select(clean: Graph, split: Split, cfg: AttackConfig, variant: AttackVariant):
    """Targets per group plus the Bayesian model and report when uncertainty drives selection."""
    candidates = clean.labeled_nodes()
    if variant is AttackVariant.RANDOM_TARGETS:
        counts = tuple(
            selection_size(cfg.k_percent, int((clean.sensitive[candidates] == g).sum()))
            for g in (0, 1)
        )
        targets = random_targets(clean, candidates, counts, derive_rng(cfg.seed, "random-targets"))
        logger.info(f"Random targets: {len(targets[0])} / {len(targets[1])}")
        return targets, None, None

    adj = normalize_adjacency(clean)
    bayesian = uncertainty.train_bayesian(
        clean, split, samples=cfg.samples, keep_prob=cfg.keep_prob, hidden=cfg.hidden,
        epochs=cfg.bayes_epochs, lr=cfg.lr_surrogate, seed=derive_seed(cfg.seed, "bayes"),
        adj=adj,
    )
    scores = uncertainty.estimate_uncertainty(
        bayesian, clean, samples=cfg.samples, keep_prob=cfg.keep_prob,
        seed=derive_seed(cfg.seed, "uncertainty"), adj=adj,
    )
    targets = uncertainty.select_targets(scores, clean, candidates, cfg.k_percent)
    report = UncertaintyReport(scores, cfg.samples, cfg.keep_prob, targets, clean.sensitive)
    logger.info(f"Uncertainty targets: {len(targets[0])} / {len(targets[1])}")
    return targets, bayesian, report


def _pretrain_surrogate(clean: Graph, split: Split, cfg: AttackConfig) -> ModelParams:
    """Surrogate initialized once and trained on the clean graph before any injection."""
    surrogate = init_params(ModelKind.GCN2, clean.num_features, clean.num_classes,
                            hidden=cfg.hidden, seed=derive_seed(cfg.seed, "surrogate"))
    return train(surrogate, clean, split, epochs=cfg.bayes_epochs, lr=cfg.lr_surrogate,
                 seed=derive_seed(cfg.seed, "surrogate-train"))


def _final_features(features: np.ndarray, clean: Graph, discrete: bool) -> np.ndarray:
    return round_features(features, clean) if discrete else clamp_features(features, clean)


def run_attack(clean: Graph, split: Split, cfg: Optional[AttackConfig] = None,
               variant=AttackVariant.FULL, bus: Optional[EventBus] = None) -> AttackResult:
    """
    Poison ``clean`` and return the poisoned graph, its plan and the step log.

    Args:
        clean: Graph without injected nodes
        split: Split of the clean labeled nodes (used for every CE term)
        cfg: Attack configuration; budgets left unset are derived from ``clean``
        variant: Full attack or one of its ablations
        bus: Event bus receiving ``attack.step`` events (a private one if None)

    Raises:
        ConfigError: invalid configuration
        AttackAbortedError: empty sensitive group, diverging surrogate pretraining
            or non-finite loss
    """
    cfg = (cfg or AttackConfig()).resolve_budgets(clean)
    errors = cfg.validate()
    if errors:
        raise ConfigError("invalid attack configuration", errors)
    variant = AttackVariant.parse(variant)
    split.validate_against(clean)
    _check_groups(clean, split)

    bus = bus or EventBus(record=False)
    log = AttackLog().attach(bus)
    try:
        return _optimize(clean, split, cfg, variant, bus, log)
    finally:
        log.detach(bus)


def _optimize(clean: Graph, split: Split, cfg: AttackConfig, variant: AttackVariant,
              bus: EventBus, log: AttackLog) -> AttackResult:
    logger.info(
        f"Attack {variant.value}: b={cfg.node_budget} d={cfg.degree_budget} "
        f"k={cfg.k_percent} alpha={cfg.alpha} beta={cfg.beta} seed={cfg.seed}"
    )

    targets, bayesian, report = _select(clean, split, cfg, variant)
    plan = build_plan(
        targets, cfg.node_budget, cfg.degree_budget, derive_rng(cfg.seed, "plan"),
        mixed=variant is AttackVariant.MIXED_GROUPS, num_features=clean.num_features,
        seed=cfg.seed,
    )
    plan = plan.with_features(init_features(
        plan, clean, cfg.init_strategy, derive_rng(cfg.seed, "init-features"), cfg.init_noise,
    ))

    initial = apply_plan(clean, plan)
    adj = normalize_adjacency(initial)
    features = np.array(initial.features, copy=True)
    rows = np.arange(clean.num_nodes, initial.num_nodes)

    attack_spec = LossSpec.attack(
        initial.labels, split.train, initial.sensitive, cfg.alpha, cfg.beta,
        injected_rows=rows, injected_groups=plan.groups, eo_form=cfg.eo_form,
    )
    surrogate_spec = replace(attack_spec, weights={"ce": 1.0, "sp": 0.0, "eo": 0.0, "cf": 0.0})

    try:
        surrogate = _pretrain_surrogate(clean, split, cfg)
    except TrainingError as e:
        raise AttackAbortedError(f"surrogate pretraining failed: {e}", plan) from e
    frozen = variant is AttackVariant.FROZEN_SURROGATE
    optimizer = AdamOptimizer(lr=cfg.lr_surrogate)
    feature_optimizer = AdamOptimizer(lr=cfg.lr_feature)
    last_good = features[rows].copy()

    def abort(message: str, iteration: int, step: int):
        raise AttackAbortedError(message, plan.with_features(last_good), iteration, step)

    for iteration in range(cfg.max_iter):
        if not frozen:
            for step in range(cfg.max_step):
                grads = backward(surrogate, adj, features, None, surrogate_spec)
                if not grads.terms.is_finite():
                    abort("non-finite surrogate loss", iteration, step)
                bus.emit(STEP_EVENT, iteration, step, "surrogate", grads.terms)
                surrogate = optimizer.step(surrogate, grads.params)

        for step in range(cfg.max_step):
            grads = backward(surrogate, adj, features, None, attack_spec, rows=rows)
            if not grads.terms.is_finite() or not np.isfinite(grads.features).all():
                abort("non-finite attack loss", iteration, step)
            bus.emit(STEP_EVENT, iteration, step, "feature", grads.terms)
            features[rows] = feature_optimizer.step_arrays(
                {"features": features[rows]}, {"features": grads.features})["features"]

        features[rows] = clamp_features(features[rows], clean)
        # moments never survive a clamp
        feature_optimizer.reset()
        last_good = features[rows].copy()
        if log.rows:
            logger.info(f"Iteration {iteration + 1}/{cfg.max_iter}: L_total={log.rows[-1][7]:.5f}")

    final_plan = plan.with_features(_final_features(last_good, clean, cfg.discrete_features))
    final_plan.metadata.update({"variant": variant.value, "config": cfg.to_dict()})
    poisoned = apply_plan(clean, final_plan)
    logger.info(f"Attack finished: {poisoned.num_nodes - clean.num_nodes} nodes injected")
    return AttackResult(
        poisoned=poisoned, plan=final_plan, log=log, config=cfg, variant=variant,
        surrogate=surrogate, bayesian=bayesian, report=report,
        info={"targets": [len(t) for t in targets], "steps": len(log)},
    )


def run_ablation(clean: Graph, split: Split, cfg: Optional[AttackConfig],
                 variant, bus: Optional[EventBus] = None) -> AttackResult:
    """One of the ablated attacks (random targets, mixed-group edges, frozen surrogate)."""
    variant = AttackVariant.parse(variant)
    if variant is AttackVariant.FULL:
        raise ValueError(
            "run_ablation needs an ablated variant; use run_attack for the full attack"
        )
    return run_attack(clean, split, cfg, variant=variant, bus=bus)
