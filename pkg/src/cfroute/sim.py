"""One replication end to end, and aggregation over replications.

Agents are planned strictly in arrival order: an exact router sees the
planned schedules of everyone assigned before it.  Planning only uses
expected speeds and dwell times, so a replication's plans do not depend on
how the routes are later realised; :func:`plan_replication` and
:func:`realize_replication` are kept separate so scenarios that differ only
in realisation can share plans.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from typing import Iterable, Sequence

from .exact import RouteInstance, SolverLimitError, SolverSettings, solve_tsp, solve_tsp_mc, solve_tsp_nc
from .grid import Cell, DistanceMatrix, Layout, all_pairs_distances, default_layout
from .heuristics import greedy_route, preferential_route, sample_preference
from .noncompliance import Compliance, ComplianceProfile, VisitKind, realize_sequence
from .schedule import TOUCH_TOL, PlannedSchedule, arrival_time, blocked_windows, schedule
from .stochastics import (ARRIVALS, COMPLIANCE, DWELL, NODE_SET, PREFERENCE, SPEED, RandomStream,
                          StochasticConfig, sample_arrivals, sample_dwell, sample_node_set,
                          sample_speed)


class Policy(str, Enum):
    GREEDY = "greedy"
    PREFERENTIAL = "preferential"
    TSP = "tsp"
    TSP_NC = "tsp-nc"
    TSP_MC = "tsp-mc"

    @property
    def assigned(self) -> bool:
        """Routes handed to the agent (as opposed to chosen by the agent)."""
        return self in (Policy.TSP, Policy.TSP_NC, Policy.TSP_MC)


NONCOMPLIANCE_SCENARIOS = ("none", "a", "b", "c", "mixed")


@dataclass(frozen=True)
class SimConfig:
    stoch: StochasticConfig = field(default_factory=StochasticConfig)
    penalty: float = 1000.0
    solver: SolverSettings = field(default_factory=SolverSettings)
    noncompliance: str = "none"
    type_c_prob: float = 0.2

    def __post_init__(self):
        if self.noncompliance not in NONCOMPLIANCE_SCENARIOS:
            raise ValueError(f"unknown noncompliance scenario {self.noncompliance!r}")

    def planning_key(self) -> tuple:
        """Everything plans depend on; realisation-only fields are left out."""
        s = replace(self.stoch, deterministic_realization=False)
        return (s, self.penalty, self.solver)


@dataclass(frozen=True)
class AgentPlan:
    agent: int
    t0: float
    node_set: frozenset[Cell]
    policy: Policy
    order: tuple[Cell, ...]
    planned: PlannedSchedule
    nc_infeasible: bool = False
    compliance: ComplianceProfile = ComplianceProfile()
    preference: tuple[str, ...] | None = None
    planned_contacts: int = 0
    solver_expanded: int = 0
    solver_runtime: float = 0.0
    limit_hit: bool = False


@dataclass(frozen=True)
class VisitRecord:
    agent: int
    node: Cell
    entry: float
    exit: float
    kind: VisitKind = VisitKind.ASSIGNED


class ReplicationError(RuntimeError):
    """A replication could not be completed; ``partial`` holds finished replications, if any."""

    partial: dict | None = None


def agent_stream(seed: int, agent: int) -> RandomStream:
    return RandomStream(seed, (1, agent))


def _windows_for(active: list[AgentPlan], t0: float, Eb: float):
    # drop plans that have left the network; they can never block again
    active[:] = [p for p in active if p.planned.exit_time > t0]
    return blocked_windows(active, t0, Eb)


def assign_route(agent: int, t0: float, node_set: frozenset[Cell], policy: Policy,
                 active_plans: list[AgentPlan], layout: Layout, dist: DistanceMatrix,
                 cfg: SimConfig, rng: RandomStream | None = None) -> AgentPlan:
    """Route one arriving agent given every plan assigned before it."""
    policy = Policy(policy)
    Eb, Ev = cfg.stoch.expected_dwell, cfg.stoch.expected_speed
    preference = None
    if policy is Policy.GREEDY:
        order = greedy_route(node_set, layout, dist)
    elif policy is Policy.PREFERENTIAL:
        rng = rng or agent_stream(0, agent)
        preference = sample_preference(node_set, layout, rng.substream(PREFERENCE))
        order = preferential_route(node_set, preference, layout, dist)
    else:
        windows = _windows_for(active_plans, t0, Eb)
        inst = RouteInstance.make(node_set, dist, t0, Ev, Eb, windows, penalty=cfg.penalty)
        try:
            if policy is Policy.TSP:
                sol = solve_tsp(inst, cfg.solver)
            elif policy is Policy.TSP_MC:
                sol = solve_tsp_mc(inst, cfg.solver)
            else:
                sol = solve_tsp_nc(inst, cfg.solver)
                if not sol.feasible:
                    fallback = solve_tsp_mc(inst, cfg.solver)
                    return AgentPlan(agent, t0, node_set, policy, fallback.order, fallback.sched,
                                     nc_infeasible=True, planned_contacts=fallback.planned_contacts,
                                     solver_expanded=sol.expanded + fallback.expanded,
                                     solver_runtime=sol.runtime + fallback.runtime,
                                     limit_hit=sol.limit_hit or fallback.limit_hit)
        except SolverLimitError as exc:
            raise ReplicationError(f"agent {agent}: {exc}") from exc
        return AgentPlan(agent, t0, node_set, policy, sol.order, sol.sched,
                         planned_contacts=sol.planned_contacts, solver_expanded=sol.expanded,
                         solver_runtime=sol.runtime, limit_hit=sol.limit_hit)
    sched = schedule(order, t0, Ev, Eb, dist)
    return AgentPlan(agent, t0, node_set, policy, order, sched, preference=preference)


def plan_replication(cfg: SimConfig, policy: Policy, seed: int, layout: Layout,
                     dist: DistanceMatrix) -> list[AgentPlan]:
    root = RandomStream(seed)
    arrivals = sample_arrivals(cfg.stoch, root.substream(0, ARRIVALS))
    plans: list[AgentPlan] = []
    active: list[AgentPlan] = []
    for agent, t0 in enumerate(arrivals):
        rng = agent_stream(seed, agent)
        node_set = sample_node_set(cfg.stoch, layout, rng.substream(NODE_SET))
        plan = assign_route(agent, t0, node_set, policy, active, layout, dist, cfg, rng)
        plans.append(plan)
        active.append(plan)
    return plans


def compliance_for(plan: AgentPlan, cfg: SimConfig, seed: int) -> ComplianceProfile:
    scenario = cfg.noncompliance
    if scenario == "none" or not plan.policy.assigned:
        return ComplianceProfile(Compliance.COMPLIANT, cfg.type_c_prob)
    if scenario == "mixed":
        draw = agent_stream(seed, plan.agent).substream(COMPLIANCE, 0).integers(3)
        mode = (Compliance.TYPE_A, Compliance.TYPE_B, Compliance.TYPE_C)[draw]
    else:
        mode = Compliance(scenario)
    return ComplianceProfile(mode, cfg.type_c_prob)


def realize(plan: AgentPlan, layout: Layout, dist: DistanceMatrix, cfg: SimConfig,
            rng: RandomStream) -> tuple[list[VisitRecord], float]:
    """Walk the executed sequence with sampled speeds and dwells.

    Returns the visit records (entry excluded) and the time the agent is back
    at the entry.  Under deterministic realisation the clock is evaluated
    exactly as the planner's, so a compliant agent reproduces its plan.
    """
    st = cfg.stoch
    seq = realize_sequence(plan.order, plan.compliance, layout, dist, rng.substream(COMPLIANCE, 1))
    dwell_rng, speed_rng = rng.substream(DWELL), rng.substream(SPEED)
    det = st.deterministic_realization
    Eb, Ev = st.expected_dwell, st.expected_speed
    t0 = plan.t0

    depart = t0 + sample_dwell(st, dwell_rng)
    prev = seq[0][0]
    travelled = 0
    records = []
    for position, (node, kind) in enumerate(seq[1:], start=1):
        c = dist.between(prev, node)
        v = sample_speed(st, speed_rng)
        travelled += c
        arrive = arrival_time(t0, position, travelled, Eb, Ev) if det else depart + c / v
        leave = arrive + sample_dwell(st, dwell_rng)
        records.append(VisitRecord(plan.agent, node, arrive, leave, kind))
        depart, prev = leave, node
    c = dist.between(prev, seq[0][0])
    v = sample_speed(st, speed_rng)
    back = arrival_time(t0, len(seq), travelled + c, Eb, Ev) if det else depart + c / v
    return records, back


def count_contacts(records: Iterable[VisitRecord], warmup: float, horizon: float,
                   exclude: Iterable[int] = (), entry: Cell | None = None) -> int:
    """Pairwise positive-length overlaps per node whose start falls in [warmup, horizon]."""
    skip = set(exclude)
    by_node: dict[Cell, list[VisitRecord]] = {}
    for r in records:
        if r.agent in skip or r.node == entry:
            continue
        by_node.setdefault(r.node, []).append(r)
    total = 0
    for visits in by_node.values():
        visits.sort(key=lambda r: (r.entry, r.exit, r.agent))
        for i, a in enumerate(visits):
            for b in visits[i + 1:]:
                if b.entry >= a.exit - TOUCH_TOL:
                    break
                if b.agent == a.agent or min(a.exit, b.exit) - b.entry <= TOUCH_TOL:
                    continue
                if warmup <= b.entry <= horizon:
                    total += 1
    return total


@dataclass
class RunMetrics:
    seed: int
    policy: str
    contacts: int
    contacts_feasible: int        # infeasible-NC (fallback) agents left out
    mnnt_mean: float
    infeasible_count: int         # among measured agents
    infeasible_total: int
    agents_measured: int
    agents_total: int
    planned_contacts: int
    limit_hits: int
    expanded_mean: float
    expanded_max: int
    runtime_mean: float
    runtime_se: float
    runtime_max: float
    mnnt_values: list[float] = field(default_factory=list, repr=False)

    def as_dict(self, timing: bool = True) -> dict:
        d = asdict(self)
        if not timing:
            for k in ("runtime_mean", "runtime_se", "runtime_max"):
                d.pop(k)
        return d


def _se(values: Sequence[float]) -> float:
    return statistics.stdev(values) / math.sqrt(len(values)) if len(values) > 1 else 0.0


def realize_replication(plans: Sequence[AgentPlan], cfg: SimConfig, seed: int, layout: Layout,
                        dist: DistanceMatrix):
    plans = [replace(p, compliance=compliance_for(p, cfg, seed)) for p in plans]
    records: list[VisitRecord] = []
    back: dict[int, float] = {}
    for p in plans:
        recs, t_back = realize(p, layout, dist, cfg, agent_stream(seed, p.agent))
        records.extend(recs)
        back[p.agent] = t_back
    return plans, records, back


def measure(plans: Sequence[AgentPlan], records: Sequence[VisitRecord], back: dict[int, float],
            cfg: SimConfig, seed: int, policy: Policy, entry: Cell | None = None) -> RunMetrics:
    st = cfg.stoch
    measured = [p for p in plans if st.warmup <= p.t0 <= st.horizon]
    mnnt = [(back[p.agent] - p.t0) / len(p.node_set) for p in measured]
    infeasible = {p.agent for p in plans if p.nc_infeasible}
    runtimes = [p.solver_runtime for p in plans] or [0.0]
    expanded = [p.solver_expanded for p in plans] or [0]
    return RunMetrics(
        seed=seed,
        policy=Policy(policy).value,
        contacts=count_contacts(records, st.warmup, st.horizon, entry=entry),
        contacts_feasible=count_contacts(records, st.warmup, st.horizon, infeasible, entry),
        mnnt_mean=statistics.fmean(mnnt) if mnnt else 0.0,
        infeasible_count=sum(p.nc_infeasible for p in measured),
        infeasible_total=len(infeasible),
        agents_measured=len(measured),
        agents_total=len(plans),
        planned_contacts=sum(p.planned_contacts for p in measured),
        limit_hits=sum(p.limit_hit for p in plans),
        expanded_mean=statistics.fmean(expanded),
        expanded_max=max(expanded),
        runtime_mean=statistics.fmean(runtimes),
        runtime_se=_se(runtimes),
        runtime_max=max(runtimes),
        mnnt_values=mnnt,
    )


def run_replication(cfg: SimConfig, policy: Policy | str, seed: int, layout: Layout | None = None,
                    dist: DistanceMatrix | None = None,
                    plans: Sequence[AgentPlan] | None = None) -> RunMetrics:
    policy = Policy(policy)
    layout = layout or default_layout()
    dist = dist or all_pairs_distances(layout)
    if plans is None:
        plans = plan_replication(cfg, policy, seed, layout, dist)
    plans, records, back = realize_replication(plans, cfg, seed, layout, dist)
    return measure(plans, records, back, cfg, seed, policy, layout.entry)


SUMMARY_FIELDS = ("contacts", "contacts_feasible", "mnnt_mean", "infeasible_count",
                  "infeasible_total", "agents_measured", "planned_contacts", "limit_hits",
                  "expanded_mean", "runtime_mean")


def aggregate(values: Sequence[float]) -> dict[str, float]:
    """Mean, sample SD and SE; a single replication reports SD = SE = 0."""
    n = len(values)
    mean = statistics.fmean(values)
    sd = statistics.stdev(values) if n > 1 else 0.0
    return {"mean": mean, "sd": sd, "se": sd / math.sqrt(n), "n": n}


@dataclass
class ExperimentSummary:
    policy: str
    seeds: list[int]
    runs: list[RunMetrics]

    def aggregate(self) -> dict[str, dict[str, float]]:
        return {f: aggregate([getattr(r, f) for r in self.runs]) for f in SUMMARY_FIELDS}


def _replicate(args) -> dict[str, RunMetrics]:
    scenarios, policy, seed, layout, dist = args
    plans_by_key: dict = {}
    out = {}
    for name, cfg in scenarios.items():
        key = cfg.planning_key()
        if key not in plans_by_key:
            plans_by_key[key] = plan_replication(cfg, policy, seed, layout, dist)
        out[name] = run_replication(cfg, policy, seed, layout, dist, plans=plans_by_key[key])
    return out


def run_scenarios(scenarios: dict[str, SimConfig], policy: Policy | str, n_reps: int = 30,
                  base_seed: int = 0, layout: Layout | None = None,
                  workers: int = 1) -> dict[str, ExperimentSummary]:
    """Run several realisation scenarios on common random numbers.

    Replication ``i`` uses seed ``base_seed + i`` in every scenario, and
    scenarios with the same planning inputs share one set of plans.
    """
    if n_reps < 1:
        raise ValueError("n_reps must be at least 1")
    policy = Policy(policy)
    layout = layout or default_layout()
    dist = all_pairs_distances(layout)
    seeds = [base_seed + i for i in range(n_reps)]
    jobs = [(scenarios, policy, s, layout, dist) for s in seeds]
    results: list[dict[str, RunMetrics]] = []

    def summaries() -> dict[str, ExperimentSummary]:
        done = seeds[:len(results)]
        return {name: ExperimentSummary(policy.value, done, [r[name] for r in results])
                for name in scenarios}

    try:
        if workers > 1:
            from concurrent.futures import ProcessPoolExecutor
            with ProcessPoolExecutor(max_workers=workers) as pool:
                # map yields in submission order, so results stay seed-ordered
                for r in pool.map(_replicate, jobs):
                    results.append(r)
        else:
            for job in jobs:
                results.append(_replicate(job))
    except ReplicationError as err:
        err.partial = summaries()
        raise
    return summaries()


def run_experiment(cfg: SimConfig, policy: Policy | str, n_reps: int = 30, base_seed: int = 0,
                   layout: Layout | None = None, workers: int = 1) -> ExperimentSummary:
    return run_scenarios({"run": cfg}, policy, n_reps, base_seed, layout, workers)["run"]
