"""
CLI Commands
============

Subcommands:
- solve     - one Riemann problem (constrained when the config has a constraint)
- simulate  - front tracking, CSV/SVG output
- analyze   - analysis suites, CSV report
- describe  - derived model constants and hypothesis checks
"""

import argparse
import json
import logging
from typing import Any, Dict, List

from phase_traffic.core.errors import ConfigError
from phase_traffic.models.run_config import RunConfig, load_run_config
from phase_traffic.pipeline.front_tracking import convergence_study
from phase_traffic.services.output_service import output_service
from phase_traffic.services.solver_service import solver_service

logger = logging.getLogger(__name__)


def _load(args: argparse.Namespace) -> RunConfig:
    cfg = load_run_config(args.config)
    return cfg.with_overrides(seed=args.seed, delta_v=args.delta_v)


def _fmt(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.17g}"
    if isinstance(value, tuple):
        return "(" + ", ".join(_fmt(v) for v in value) + ")"
    return str(value)


def _summary_text(title: str, items: Dict[str, Any]) -> str:
    lines = [title] + [f"  {k}: {_fmt(v)}" for k, v in items.items()]
    return "\n".join(lines) + "\n"


def cmd_solve(args: argparse.Namespace) -> int:
    cfg = _load(args)
    p = cfg.model.build()
    u_l, u_r = cfg.riemann_states()
    result = solver_service.solve(p, u_l, u_r, cfg.F)

    summary = _summary_text("summary", result["summary"])
    print(result["record"], end="")
    print(summary, end="")
    if args.out:
        out = output_service.ensure_dir(cfg.output_dir(args.out))
        output_service.write_text(result["record"] + summary, out / "solution.txt")
    return 0 if result["summary"]["admissible"] else 1


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _load(args)
    p = cfg.model.build()
    sim = cfg.sim_config(p)
    result = solver_service.simulate(p, sim)
    trace = result["trace"]

    out = output_service.ensure_dir(cfg.output_dir(args.out))
    names = cfg.output
    if "csv" in names.formats:
        output_service.write_profiles(trace, out / names.profiles)
        output_service.write_events(trace, out / names.events)
        output_service.write_gate_flux(trace, out / names.gate_flux)
        output_service.write_mass(trace, out / names.mass)
    if "svg" in names.formats:
        title = f"{p.variant.value}" + (f", F = {cfg.F:g}" if cfg.F is not None else "")
        output_service.write_diagram(trace, out / names.diagram, title)

    items: Dict[str, Any] = {"events": len(trace.events), "t_final": trace.t_final,
                             "mass_drift": result["mass_drift"]}
    items.update(result["macro_times"])
    if args.convergence:
        deltas = [float(d) for d in args.convergence.split(",")]
        rows = convergence_study(p, sim, deltas)
        output_service.write_table(rows, out / "convergence.csv")
        items["convergence_runs"] = len(rows)

    text = _summary_text("simulation", items)
    if "txt" in names.formats:
        output_service.write_text(text, out / names.summary)
    print(text, end="")
    return 0


def cmd_analyze(args: argparse.Namespace) -> int:
    cfg = _load(args)
    p = cfg.model.build()
    suites: List[str] = args.suite or cfg.analysis.suites
    result = solver_service.analyze(p, suites, cfg.F, cfg.analysis_options())

    lines = []
    for r in result["results"]:
        lines.append(f"{r.name}: {'PASS' if r.passed else 'FAIL'}")
        lines += [f"  {k}: {'ok' if ok else 'failed'}" for k, ok in r.checks.items()]
        lines += [f"  {k} (recorded): {_fmt(v)}" for k, v in r.recorded.items()]
    text = "\n".join(lines) + "\n"

    out = output_service.ensure_dir(cfg.output_dir(args.out))
    if "csv" in cfg.output.formats:
        output_service.write_analysis(result["results"], out / cfg.output.analysis)
    if "txt" in cfg.output.formats:
        output_service.write_text(text, out / cfg.output.summary)
    print(text, end="")
    return 0 if result["success"] else 1


def cmd_describe(args: argparse.Namespace) -> int:
    cfg = _load(args)
    p = cfg.model.build()
    result = solver_service.describe(p)
    print(_summary_text(f"{p.variant.value} model", result["description"]), end="")
    print(json.dumps(result["validation"].model_dump(), indent=2))
    return 0 if result["success"] else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="phase-traffic",
        description="Two-phase traffic models: Riemann solvers, flux constraints, front tracking",
    )
    parser.add_argument("--log-level", default=None, help="Override PHASE_TRAFFIC_LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, handler, help_text: str) -> argparse.ArgumentParser:
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", required=True, help="Path to the JSON run configuration")
        cmd.add_argument("--out", default=None, help="Output directory (created if missing)")
        cmd.add_argument("--seed", type=int, default=None, help="Sampling seed (overrides the config)")
        cmd.add_argument("--delta-v", dest="delta_v", type=float, default=None,
                         help="Rarefaction step in v (overrides the config)")
        cmd.set_defaults(handler=handler)
        return cmd

    add("solve", cmd_solve, "Solve one Riemann problem")
    simulate = add("simulate", cmd_simulate, "Run front tracking")
    simulate.add_argument("--convergence", default=None,
                          help="Comma-separated delta_v values for a convergence study")
    analyze = add("analyze", cmd_analyze, "Run analysis suites")
    analyze.add_argument("--suite", action="append", default=None,
                         help="Suite to run; repeat for several (default: the config's list)")
    add("describe", cmd_describe, "Print derived model constants")
    return parser


def dispatch(args: argparse.Namespace) -> int:
    if not hasattr(args, "handler"):
        raise ConfigError("No command given")
    return args.handler(args)
