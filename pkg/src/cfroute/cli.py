"""Command line driver.

Settings come from, in increasing priority: built-in defaults, a flat
``key = value`` file given with ``--config``, command line flags, and the
``CFR_SEED`` environment variable (seed only).  Config keys are the flag names
without the leading dashes; underscores and dashes are interchangeable.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, replace
from typing import Callable

from .exact import RouteInstance, SolverLimitError, SolverSettings, Variant, solve
from .grid import Cell, LayoutError, all_pairs_distances, load_layout
from .report import build_report, emit_report, experiment_dict
from .schedule import BlockedWindowTable
from .sim import NONCOMPLIANCE_SCENARIOS, Policy, ReplicationError, SimConfig, run_scenarios
from .stochastics import StochasticConfig


def _bool(text: str) -> bool:
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass(frozen=True)
class Option:
    name: str
    kind: Callable
    default: object
    help: str
    choices: tuple | None = None


OPTIONS = (
    Option("layout", str, None, "layout file (default: bundled 10 x 7 layout)"),
    Option("policy", str, "tsp-nc", "traversal policy", tuple(p.value for p in Policy)),
    Option("lambda", float, 40.0, "arrival rate, agents per hour"),
    Option("p-node", float, 0.3, "probability that a node is in an agent's node set"),
    Option("dwell-mean", float, 2.0, "mean dwell time, minutes"),
    Option("penalty", float, 1000.0, "TSP-MC penalty per planned contact"),
    Option("reps", int, 30, "number of replications"),
    Option("seed", int, 0, "base seed; replication i uses seed + i"),
    Option("horizon", float, 180.0, "arrival horizon, minutes"),
    Option("warmup", float, 60.0, "warm-up excluded from metrics, minutes"),
    Option("deterministic-realization", _bool, False, "realise expected dwell and speed"),
    Option("noncompliance", str, "none", "noncompliance scenario", NONCOMPLIANCE_SCENARIOS),
    Option("type-c-prob", float, 0.2, "per-node neighbour-detour probability (type C)"),
    Option("size-cap", int, 24, "largest node set the exact router accepts"),
    Option("node-limit", int, 5_000_000, "search-state budget per exact solve"),
    Option("time-limit", float, 60.0, "wall-clock budget per exact solve, seconds"),
    Option("workers", int, 1, "parallel replication workers"),
    Option("out", str, None, "report path (default: stdout)"),
    Option("format", str, "json", "report format", ("json", "csv")),
    Option("timing", _bool, False, "include solver runtimes (makes reports non-deterministic)"),
    Option("variant", str, "nc", "route: solver variant", tuple(v.value for v in Variant)),
    Option("export-lp", _bool, False, "route: print the MILP model instead of solving"),
)
BY_KEY = {o.name.replace("-", "_"): o for o in OPTIONS}


class ConfigError(ValueError):
    pass


def read_config_file(path: str) -> dict[str, object]:
    values = {}
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or key not in BY_KEY:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value' with a known key, got {raw.strip()!r}")
        values[key] = _convert(BY_KEY[key], value.strip())
    return values


def _convert(opt: Option, value: str):
    try:
        out = opt.kind(value)
    except ValueError as exc:
        raise ConfigError(f"{opt.name}: {exc}") from exc
    if opt.choices and out not in opt.choices:
        raise ConfigError(f"{opt.name}: {out!r} not one of {', '.join(opt.choices)}")
    return out


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value settings file")
    for opt in OPTIONS:
        dest = opt.name.replace("-", "_")
        if opt.kind is _bool:
            common.add_argument(f"--{opt.name}", dest=dest, nargs="?", const="true",
                                default=argparse.SUPPRESS, help=opt.help)
        else:
            common.add_argument(f"--{opt.name}", dest=dest, default=argparse.SUPPRESS,
                                choices=opt.choices, help=opt.help)
    p = argparse.ArgumentParser(prog="cfroute", description="Contact-free routing simulation")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="one policy, one scenario")
    sub.add_parser("table1", parents=[common], help="all policies, expected vs random dwell/speed")
    sub.add_parser("table2", parents=[common], help="NC/MC under each noncompliance scenario")
    r = sub.add_parser("route", parents=[common], help="solve one routing instance (JSON)")
    r.add_argument("instance", help="instance JSON file")
    v = sub.add_parser("validate", parents=[common], help="router vs exhaustive search and MILP")
    v.add_argument("--instances", type=int, default=500)
    v.add_argument("--milp-instances", type=int, default=20)
    return p


def resolve_settings(ns: argparse.Namespace, environ=os.environ) -> dict[str, object]:
    settings = {key: opt.default for key, opt in BY_KEY.items()}
    if getattr(ns, "config", None):
        settings.update(read_config_file(ns.config))
    for key, opt in BY_KEY.items():
        if key in vars(ns):
            settings[key] = _convert(opt, getattr(ns, key))
    if environ.get("CFR_SEED"):
        settings["seed"] = _convert(BY_KEY["seed"], environ["CFR_SEED"])
    if settings["reps"] < 1:
        raise ConfigError("reps must be at least 1")
    if settings["workers"] < 1:
        raise ConfigError("workers must be at least 1")
    return settings


def sim_config(s: dict) -> SimConfig:
    stoch = StochasticConfig(arrival_rate=s["lambda"], node_probability=s["p_node"],
                             dwell_mean=s["dwell_mean"], horizon=s["horizon"], warmup=s["warmup"],
                             deterministic_realization=s["deterministic_realization"])
    solver = SolverSettings(size_cap=s["size_cap"], node_limit=s["node_limit"],
                            time_limit=s["time_limit"])
    return SimConfig(stoch, penalty=s["penalty"], solver=solver,
                     noncompliance=s["noncompliance"], type_c_prob=s["type_c_prob"])


def _report_config(s: dict, command: str) -> dict:
    skip = {"out", "format", "workers", "variant", "export_lp"}
    return {"command": command, **{k: v for k, v in s.items() if k not in skip}}


def _experiments(command: str, s: dict, cfg: SimConfig):
    """(policy, scenarios) jobs for an experiment subcommand."""
    if command == "run":
        return [(s["policy"], {"run": cfg})]
    if command == "table1":
        det = _replace_stoch(cfg, deterministic_realization=True)
        rnd = _replace_stoch(cfg, deterministic_realization=False)
        return [(p.value, {"arrivals": det, "arrivals+speed+dwell": rnd}) for p in Policy]
    if command == "table2":
        rnd = _replace_stoch(cfg, deterministic_realization=False)
        scen = {nc: replace(rnd, noncompliance=nc) for nc in NONCOMPLIANCE_SCENARIOS}
        return [(p, scen) for p in (Policy.TSP_NC.value, Policy.TSP_MC.value)]
    raise ValueError(command)


def _replace_stoch(cfg: SimConfig, **changes) -> SimConfig:
    return replace(cfg, stoch=replace(cfg.stoch, **changes))


def run_command(command: str, s: dict) -> int:
    cfg = sim_config(s)
    layout = load_layout(s["layout"])
    experiments, status = [], 0
    for policy, scenarios in _experiments(command, s, cfg):
        try:
            results = run_scenarios(scenarios, policy, s["reps"], s["seed"], layout, s["workers"])
        except ReplicationError as err:
            print(f"cfroute: {err}; writing completed replications", file=sys.stderr)
            results = {k: v for k, v in (err.partial or {}).items() if v.runs}
            status = 3
        for name, summary in results.items():
            extra = {} if command == "run" else {"scenario": name}
            experiments.append(experiment_dict(summary, timing=s["timing"], **extra))
        if status:
            break
    if experiments:
        emit_report(build_report(_report_config(s, command), experiments), s["format"], s["out"])
    return status


def load_instance(path: str, s: dict) -> RouteInstance:
    with open(path) as fh:
        data = json.load(fh)
    layout = load_layout(data.get("layout", s["layout"]))
    dist = all_pairs_distances(layout)
    node_set = [Cell(*c) for c in data["node_set"]]
    Eb = float(data.get("Eb", s["dwell_mean"]))
    windows = {Cell(*w["node"]): tuple(float(d) for d in w["starts"]) for w in data.get("windows", [])}
    for cell in node_set + list(windows):
        if not layout.is_node(cell):
            raise ConfigError(f"{path}: {tuple(cell)} is not a node cell of the layout")
    Ev = float(data.get("Ev", StochasticConfig().expected_speed))
    return RouteInstance.make(node_set, dist, float(data.get("t0", 0.0)), Ev, Eb,
                              BlockedWindowTable(windows, Eb),
                              penalty=float(data.get("penalty", s["penalty"])),
                              big_m=data.get("big_m"))


def solution_dict(sol) -> dict:
    out = {"variant": sol.variant.value, "status": sol.status.value,
           "objective": sol.objective if sol.feasible else None,
           "tour_length": sol.tour_length if sol.feasible else None,
           "planned_contacts": sol.planned_contacts if sol.feasible else None,
           "order": [list(c) for c in sol.order] if sol.order else None,
           "arrivals": list(sol.sched.arrivals) if sol.sched else None,
           "exit_time": sol.sched.exit_time if sol.sched else None,
           "expanded": sol.expanded, "limit_hit": sol.limit_hit}
    return out


def route_command(ns, s: dict) -> int:
    inst = load_instance(ns.instance, s)
    variant = Variant(s["variant"])
    if s["export_lp"]:
        from .lpexport import export_milp
        text = export_milp(inst, variant)
    else:
        settings = SolverSettings(size_cap=s["size_cap"], node_limit=s["node_limit"],
                                  time_limit=s["time_limit"])
        text = json.dumps(solution_dict(solve(inst, variant, settings)), indent=2, sort_keys=True) + "\n"
    if s["out"] in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(s["out"], "w") as fh:
            fh.write(text)
    return 0


def validate_command(ns, s: dict) -> int:
    from .validation import milp_check, oracle_check

    layout = load_layout(s["layout"])
    rep = oracle_check(ns.instances, s["seed"], layout=layout)
    lines = [f"oracle: {rep.checked} solves, {len(rep.mismatches)} mismatches"]
    lines += [f"  {m}" for m in rep.mismatches]
    ok = rep.ok
    try:
        import highspy  # noqa: F401
    except ImportError:
        lines.append("milp: skipped (highspy not installed)")
    else:
        mrep = milp_check(ns.milp_instances, s["seed"], layout=layout)
        lines.append(f"milp: {mrep.checked} solves, {len(mrep.mismatches)} mismatches")
        lines += [f"  {m}" for m in mrep.mismatches]
        ok = ok and mrep.ok
    text = "\n".join(lines) + "\n"
    if s["out"] in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(s["out"], "w") as fh:
            fh.write(text)
    return 0 if ok else 1


def main(argv: list[str] | None = None) -> int:
    ns = _parser().parse_args(argv)
    try:
        s = resolve_settings(ns)
        if ns.command == "route":
            return route_command(ns, s)
        if ns.command == "validate":
            return validate_command(ns, s)
        return run_command(ns.command, s)
    except (ConfigError, LayoutError, SolverLimitError, ValueError, KeyError, OSError) as exc:
        print(f"cfroute: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
