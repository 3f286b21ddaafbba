"""
FairForge command line.

    python main.py generate --out runs/clean
    python main.py attack runs/clean --out runs/poisoned
    python main.py evaluate runs/poisoned --baseline runs/clean --out runs/eval
    python main.py ablate runs/clean --out runs/ablation
    python main.py defend runs/poisoned --eta 0,0.1,0.2,0.3,0.4,0.5 --out runs/defense
    python main.py audit runs/clean runs/poisoned --out runs/audit
    python main.py sweep runs/clean --param beta --values 0,1,4,8 --out runs/sweep-beta
    python main.py pipeline benchmark --var root=runs/benchmark

Exit codes: 0 success, 1 command failure, 2 usage or configuration error.
"""

import argparse
import sys
from typing import Any, Dict, List, Optional

from fairforge import __version__
from fairforge.automation.workflow_engine import (
    BENCHMARK_PIPELINE,
    PipelineDefinition,
    PipelineError,
    WorkflowEngine,
)
from fairforge.commands import register_commands
from fairforge.core.config_manager import ConfigError, ConfigManager, parse_value
from fairforge.core.engine import ExperimentEngine
from fairforge.core.event_bus import EventBus
from fairforge.utils.logger import get_logger, setup_logger


EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2


def parse_list(values: Optional[List[str]], cast) -> Optional[List[Any]]:
    """Flatten repeated/comma-separated flags; ``a-b`` expands to an integer range."""
    if not values:
        return None
    items = []
    for value in values:
        for part in str(value).split(","):
            part = part.strip()
            if not part:
                continue
            if cast is int and "-" in part[1:]:
                start, stop = part.rsplit("-", 1)
                items.extend(range(int(start), int(stop) + 1))
            else:
                items.append(cast(part))
    return items


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML configuration file")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a configuration key, e.g. attack.beta=8")
    common.add_argument("--log-level", help="DEBUG, INFO, WARNING or ERROR")
    common.add_argument("--log-file", help="also log to this file")
    common.add_argument("--workers", type=int, help="parallel seed workers")

    parser = argparse.ArgumentParser(
        prog="fairforge",
        description="Node-injection fairness attacks on graph neural networks",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    def add(name: str, help_text: str, graph: Optional[str] = "graph") -> argparse.ArgumentParser:
        p = sub.add_parser(name, parents=[common], help=help_text, description=help_text)
        if graph:
            p.add_argument(graph, help="graph directory")
        p.add_argument("--out", required=True, help="output directory (replaced atomically)")
        return p

    p = add("generate", "sample the synthetic biased SBM", graph=None)
    p.add_argument("--seed", type=int)

    p = add("attack", "poison a clean graph")
    p.add_argument("--seed", type=int)
    p.add_argument("--variant", default="full",
                   help="full, random-targets, mixed-groups or frozen-surrogate")

    p = add("evaluate", "train victims and report accuracy / ΔSP / ΔEO")
    p.add_argument("--victim", choices=("gcn", "sgc"))
    p.add_argument("--seeds", action="append", help="victim seeds, e.g. 0,1,2 or 0-4")
    p.add_argument("--baseline", help="clean graph directory for a before/after table")

    p = add("ablate", "compare the full attack with its ablations")
    p.add_argument("--seed", type=int)
    p.add_argument("--variant", action="append", help="restrict to these variants")
    p.add_argument("--victim", choices=("gcn", "sgc"))
    p.add_argument("--seeds", action="append")

    p = add("defend", "uncertainty-masking defense sweep on a poisoned graph")
    p.add_argument("--eta", action="append", help="masking rates, e.g. 0,0.1,0.2")
    p.add_argument("--seed", type=int)
    p.add_argument("--victim", choices=("gcn", "sgc"))
    p.add_argument("--seeds", action="append")

    p = add("audit", "structural statistics of clean vs. poisoned graphs", graph="clean")
    p.add_argument("poisoned", nargs="+", help="poisoned graph directories")

    p = add("sweep", "attack once per value of one hyper-parameter")
    p.add_argument("--param", choices=("alpha", "beta", "budget_rate", "k_percent"))
    p.add_argument("--values", action="append", help="comma-separated values")
    p.add_argument("--seed", type=int)
    p.add_argument("--victim", choices=("gcn", "sgc"))
    p.add_argument("--seeds", action="append")

    p = sub.add_parser("pipeline", parents=[common], help="run a pipeline file or 'benchmark'")
    p.add_argument("pipeline", help="pipeline YAML file, or 'benchmark'")
    p.add_argument("--var", action="append", default=[], metavar="NAME=VALUE",
                   help="override a pipeline variable")
    return parser


def command_params(args: argparse.Namespace) -> Dict[str, Any]:
    """Handler parameters from parsed flags; unset flags are left out."""
    params: Dict[str, Any] = {}
    for name in ("graph", "clean", "poisoned", "seed", "victim", "baseline", "param"):
        value = getattr(args, name, None)
        if value is not None:
            params[name] = value
    if args.command == "attack":
        params["variant"] = args.variant
    if getattr(args, "variant", None) and args.command == "ablate":
        params["variants"] = parse_list(args.variant, str)
    if getattr(args, "seeds", None):
        params["seeds"] = parse_list(args.seeds, int)
    if getattr(args, "eta", None):
        params["etas"] = parse_list(args.eta, float)
    if getattr(args, "values", None):
        params["values"] = [parse_value(v) for v in parse_list(args.values, str)]
    return params


def run_pipeline(args: argparse.Namespace, engine: ExperimentEngine) -> int:
    logger = get_logger("CLI")
    try:
        if args.pipeline == "benchmark":
            pipeline = PipelineDefinition.from_yaml(BENCHMARK_PIPELINE)
        else:
            pipeline = PipelineDefinition.from_file(args.pipeline)
        variables = {}
        for item in args.var:
            if "=" not in item:
                raise PipelineError(f"--var expects NAME=VALUE, got '{item}'")
            name, value = item.split("=", 1)
            variables[name.strip()] = value.strip()
    except (OSError, PipelineError) as e:
        logger.error(f"Pipeline error: {e}")
        return EXIT_USAGE

    run = WorkflowEngine(engine).run(pipeline, variables)
    for step in run.summary():
        line = f"{step['id']:<12} {step['command']:<10} {step['status']:<8} {step['out'] or ''}"
        print(line if not step["error"] else f"{line}  ({step['error']})")
    return EXIT_OK if run.status == "success" else EXIT_FAILED


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_help(sys.stderr)
        return EXIT_USAGE

    bus = EventBus()
    try:
        config = ConfigManager(bus, config_file=args.config, overrides=args.set)
    except ConfigError as e:
        setup_logger(level=args.log_level or "INFO", log_file=args.log_file)
        get_logger("CLI").error(str(e))
        return EXIT_USAGE
    if args.workers is not None:
        config.set("engine.workers", args.workers)

    setup_logger(level=args.log_level or config.get("logging.level"),
                 log_file=args.log_file or config.get("logging.file"))
    logger = get_logger("CLI")

    engine = ExperimentEngine(config, bus)
    register_commands(engine)
    errors = config.validate()
    if errors:
        for error in errors:
            logger.error(f"config: {error}")
        return EXIT_USAGE

    if args.command == "pipeline":
        return run_pipeline(args, engine)

    record = engine.execute(args.command, command_params(args), out_dir=args.out)
    if record["status"] != "completed":
        logger.error(f"{args.command} failed: {record['error']}")
        return EXIT_FAILED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
