"""
FairForge Commands
==================
Experiment commands run by the engine. Each handler receives a RunContext,
writes its artifacts into the context's staging directory and returns a
small JSON-able summary.
"""

import json
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from fairforge.attack.config import AttackConfig, AttackVariant
from fairforge.attack.optimizer import AttackResult, run_attack
from fairforge.attack.uncertainty import train_bayesian
from fairforge.attack.validation import validate_poisoned
from fairforge.core.config_manager import ConfigManager
from fairforge.core.engine import ExperimentEngine
from fairforge.core.execution_context import RunContext
from fairforge.evaluation.audit import audit_json, format_audit_table, graph_statistics
from fairforge.evaluation.defense import defense_sweep
from fairforge.evaluation.metrics import MetricsReport, format_table
from fairforge.evaluation.victim import VictimConfig, evaluate_victim
from fairforge.graph.generator import SBMConfig, generate_sbm
from fairforge.graph.graph import Graph, GraphError, Split, perturbation_rate
from fairforge.graph.io import GraphBundle, load_graph_dir, save_graph, strip_injected
from fairforge.graph.splits import make_split
from fairforge.models.checkpoint import save_params
from fairforge.utils.logger import get_logger


logger = get_logger("Commands")

ABLATION_ORDER = (AttackVariant.FULL, AttackVariant.RANDOM_TARGETS,
                  AttackVariant.MIXED_GROUPS, AttackVariant.FROZEN_SURROGATE)


def attack_config(config: ConfigManager, seed: Optional[int] = None) -> AttackConfig:
    cfg = AttackConfig.from_dict(config.get_section("attack", strip=True))
    if seed is not None:
        cfg.seed = int(seed)
    return cfg


def validate_attack_section(config: ConfigManager) -> List[str]:
    return AttackConfig.from_dict(config.get_section("attack", strip=True)).validate()


def victim_config(config: ConfigManager) -> VictimConfig:
    return VictimConfig.from_dict(config.get_section("victim", strip=True))


def victim_seeds(ctx: RunContext) -> List[int]:
    seeds = ctx.get_param("seeds") or ctx.get_config("victim.seeds")
    return [int(s) for s in seeds]


def load_clean(path) -> GraphBundle:
    """A graph directory that must not be poisoned."""
    bundle = load_graph_dir(path)
    if bundle.plan is not None or bundle.graph.injected.any():
        raise GraphError(f"{path} holds a poisoned graph; expected a clean one")
    return bundle


def bundle_split(bundle: GraphBundle, config: ConfigManager) -> Split:
    if bundle.split is not None:
        return bundle.split
    logger.info("No split.json found; building a stratified split")
    return make_split(bundle.graph, config.get("generate.split"), seed=config.get("generate.seed"))


def save_attack(ctx: RunContext, clean: Graph, split: Split, result: AttackResult,
                prefix: str = "") -> List[str]:
    """Write a poisoned graph directory plus logs, checkpoints and the validation report."""
    directory = ctx.path(prefix) if prefix else ctx.workdir
    save_graph(result.poisoned, directory, split=split, plan=result.plan,
               feature_format=ctx.get_config("generate.feature_format"))
    result.log.to_csv(directory / "attack_log.csv")
    if result.report is not None:
        result.report.to_csv(directory / "uncertainty.csv")
    save_params(result.surrogate, directory / "surrogate.ckpt")
    if result.bayesian is not None:
        save_params(result.bayesian, directory / "bayesian.ckpt")

    violations = validate_poisoned(clean, result.poisoned, result.plan,
                                   discrete=result.config.discrete_features)
    (directory / "validation.json").write_text(
        json.dumps({"violations": violations}, indent=2) + "\n"
    )
    return violations


def cmd_generate(ctx: RunContext) -> Dict:
    """Sample the synthetic biased SBM and write it as a graph directory."""
    values = ctx.config.get_section("generate", strip=True)
    seed = ctx.get_param("seed", values["seed"])
    sbm = SBMConfig(n=values["n"], num_classes=values["num_classes"],
                    num_features=values["num_features"], p_in=values["p_in"],
                    p_out=values["p_out"], bias=values["bias"],
                    feature_sep=values["feature_sep"],
                    sensitive_signal=values["sensitive_signal"], seed=int(seed))
    graph, split = generate_sbm(**sbm.to_dict(), ratios=values["split"])
    save_graph(graph, ctx.workdir, split=split, feature_format=values["feature_format"])
    ctx.write_json("generator.json", {**sbm.to_dict(), "split": values["split"]})
    ctx.seeds = [int(seed)]
    return {"nodes": graph.num_nodes, "edges": graph.num_edges,
            "labeled": int(len(graph.labeled_nodes()))}


def cmd_attack(ctx: RunContext) -> Dict:
    """Poison a clean graph directory."""
    bundle = load_clean(ctx.get_param("graph"))
    split = bundle_split(bundle, ctx.config)
    cfg = attack_config(ctx.config, ctx.get_param("seed"))
    variant = AttackVariant.parse(ctx.get_param("variant", "full"))
    ctx.seeds = [cfg.seed]

    result = run_attack(bundle.graph, split, cfg, variant=variant)
    violations = save_attack(ctx, bundle.graph, split, result)
    if violations:
        ctx.fail(f"poisoned graph failed validation: {violations}")
    rate = perturbation_rate(bundle.graph, result.plan)
    ctx.metadata.update({"variant": variant.value, "perturbation_rate": rate})
    return {"injected": result.plan.num_injected, "edges": int(len(result.plan.edges)),
            "perturbation_rate": rate, "variant": variant.value}


def _evaluate(ctx: RunContext, graph: Graph, split: Split, label: str) -> MetricsReport:
    kind = ctx.get_param("victim", ctx.get_config("victim.kind"))
    return evaluate_victim(graph, split, kind, victim_seeds(ctx), victim_config(ctx.config),
                           workers=ctx.get_config("engine.workers"), label=label)


def cmd_evaluate(ctx: RunContext) -> Dict:
    """Victim metrics on a graph directory, optionally paired with a clean baseline."""
    path = Path(ctx.get_param("graph"))
    bundle = load_graph_dir(path)
    split = bundle_split(bundle, ctx.config)
    ctx.seeds = victim_seeds(ctx)

    reports = []
    baseline = ctx.get_param("baseline")
    if baseline is not None:
        clean = load_clean(baseline)
        reports.append(_evaluate(ctx, clean.graph, split, "before"))
    label = "after" if bundle.plan is not None else "clean"
    reports.append(_evaluate(ctx, bundle.graph, split, label))

    ctx.write_json("metrics.json", {"reports": [r.to_dict() for r in reports]})
    table = format_table(reports, title=f"{reports[-1].victim.upper()} victim on {path.name}")
    ctx.write_text("metrics.txt", table)
    print(table)
    return {r.label: r.summary() for r in reports}


def cmd_ablate(ctx: RunContext) -> Dict:
    """Run the full attack and its ablations on one clean graph and compare victims."""
    bundle = load_clean(ctx.get_param("graph"))
    split = bundle_split(bundle, ctx.config)
    cfg = attack_config(ctx.config, ctx.get_param("seed"))
    variants = [AttackVariant.parse(v) for v in ctx.get_param("variants", [])] or ABLATION_ORDER
    ctx.seeds = victim_seeds(ctx)

    reports = []
    for variant in variants:
        result = run_attack(bundle.graph, split, cfg, variant=variant)
        violations = save_attack(ctx, bundle.graph, split, result, prefix=variant.value)
        if violations:
            ctx.fail(f"{variant.value}: poisoned graph failed validation: {violations}")
        reports.append(_evaluate(ctx, result.poisoned, split, variant.value))

    ctx.write_json("ablation.json", {"reports": [r.to_dict() for r in reports]})
    table = format_table(reports, title="Ablation")
    ctx.write_text("ablation.txt", table)
    print(table)
    return {r.label: r.summary() for r in reports}


def cmd_defend(ctx: RunContext) -> Dict:
    """Uncertainty-masking sweep on a poisoned graph directory."""
    bundle = load_graph_dir(ctx.get_param("graph"))
    split = bundle_split(bundle, ctx.config)
    cfg = attack_config(ctx.config, ctx.get_param("seed"))
    etas = [float(e) for e in (ctx.get_param("etas") or ctx.get_config("defense.etas"))]
    kind = ctx.get_param("victim", ctx.get_config("victim.kind"))
    seeds = victim_seeds(ctx)
    ctx.seeds = seeds

    # the defender trains its own Bayesian model on the graph it was given
    bayesian = train_bayesian(bundle.graph, split, samples=cfg.samples, keep_prob=cfg.keep_prob,
                              hidden=cfg.hidden, epochs=cfg.bayes_epochs, lr=cfg.lr_surrogate,
                              seed=cfg.seed)
    sweep = defense_sweep(bundle.graph, split, bayesian, etas, kind, seeds,
                          victim_config(ctx.config), samples=cfg.samples,
                          keep_prob=cfg.keep_prob, seed=cfg.seed,
                          workers=ctx.get_config("engine.workers"))
    if bundle.plan is not None:
        sweep.baseline = _evaluate(ctx, strip_injected(bundle.graph, bundle.clean_nodes),
                                   split, "clean")
    ctx.write_json("defense.json", sweep.to_dict())
    table = sweep.table()
    ctx.write_text("defense.txt", table)
    print(table)
    return {"etas": sweep.etas, "delta_sp": [r.mean("delta_sp") for r in sweep.reports]}


def cmd_audit(ctx: RunContext) -> Dict:
    """Structural statistics of a clean graph and the change each poisoned graph causes."""
    clean = load_clean(ctx.get_param("clean")).graph
    options = dict(
        path_length_mode=ctx.get_config("audit.path_length_mode"),
        exact_threshold=ctx.get_config("audit.exact_threshold"),
        sample_sources=ctx.get_config("audit.sample_sources"),
        workers=ctx.get_config("engine.workers"),
    )
    clean_report = graph_statistics(clean, **options)
    rows = []
    for path in ctx.get_param("poisoned", []):
        bundle = load_graph_dir(path)
        if bundle.plan is not None:
            rate = perturbation_rate(clean, bundle.plan)
        else:
            rate = (bundle.graph.num_nodes - clean.num_nodes) / len(clean.labeled_nodes())
        rows.append((Path(path).name, rate, graph_statistics(bundle.graph, **options)))

    ctx.write_text("audit.json", audit_json(clean_report, rows))
    table = format_audit_table(clean_report, rows)
    ctx.write_text("audit.txt", table)
    print(table)
    return {"graphs": [row[0] for row in rows]}


def cmd_sweep(ctx: RunContext) -> Dict:
    """Attack and evaluate once per value of one attack hyper-parameter."""
    bundle = load_clean(ctx.get_param("graph"))
    split = bundle_split(bundle, ctx.config)
    param = ctx.get_param("param", ctx.get_config("sweep.param"))
    values: Sequence = ctx.get_param("values") or ctx.get_config("sweep.values")
    if not values:
        ctx.fail("sweep needs at least one value (--values or sweep.values)")
    ctx.seeds = victim_seeds(ctx)

    rows = []
    for value in values:
        cfg = attack_config(ctx.config, ctx.get_param("seed"))
        setattr(cfg, param, value)
        if param == "budget_rate":
            cfg.node_budget = None
        errors = cfg.validate()
        if errors:
            ctx.fail(f"{param}={value}: {errors}")
        result = run_attack(bundle.graph, split, cfg)
        report = _evaluate(ctx, result.poisoned, split, f"{param}={value}")
        rows.append({"value": value, "perturbation_rate": perturbation_rate(bundle.graph,
                                                                            result.plan),
                     "report": report.to_dict()})
        logger.info(f"{param}={value}: dSP={report.mean('delta_sp'):.4f}")

    ctx.write_json("sweep.json", {"param": param, "rows": rows})
    lines = [f"{param:>12} {'rate':>8}  {'Acc (%)':>15}  {'ΔSP (%)':>15}  {'ΔEO (%)':>15}"]
    for row in rows:
        report = MetricsReport.from_dict(row["report"])
        cells = [f"{100 * report.mean(m):6.2f} ± {100 * report.std(m):5.2f}"
                 for m in ("accuracy", "delta_sp", "delta_eo")]
        lines.append(f"{row['value']!s:>12} {100 * row['perturbation_rate']:>7.2f}%  "
                     + "  ".join(cells))
    table = "\n".join(lines)
    ctx.write_text("sweep.txt", table)
    print(table)
    return {"param": param, "values": list(values)}


COMMANDS = {
    "generate": cmd_generate,
    "attack": cmd_attack,
    "evaluate": cmd_evaluate,
    "ablate": cmd_ablate,
    "defend": cmd_defend,
    "audit": cmd_audit,
    "sweep": cmd_sweep,
}


def register_commands(engine: ExperimentEngine):
    for name, handler in COMMANDS.items():
        engine.register_command(name, handler)
    engine.config_manager.add_validator(validate_attack_section)
