"""Randomised equivalence checks: exact router vs exhaustive search, and vs an external MILP solver."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exact import BRUTE_FORCE_CAP, RouteInstance, SolverSettings, Status, Variant, brute_force, solve
from .grid import DistanceMatrix, Layout, all_pairs_distances, default_layout
from .schedule import BlockedWindowTable

# one 5 m step at the expected speed; planned times all sit on this grid,
# so windows drawn on it produce plenty of exactly-touching intervals
TIME_STEP = 0.4


def random_instance(rng: np.random.Generator, layout: Layout, dist: DistanceMatrix,
                    max_nodes: int = 8, max_windows: int = 3, Ev: float = 12.5, Eb: float = 2.0,
                    penalty: float = 1000.0) -> RouteInstance:
    """Random node set (1..max_nodes nodes) with random blocked windows near the tour's time span."""
    others = list(layout.non_entry_nodes)
    m = int(rng.integers(1, max_nodes + 1))
    picks = rng.choice(len(others), size=m, replace=False)
    node_set = [others[i] for i in sorted(picks)]
    t0 = round(TIME_STEP * int(rng.integers(0, 300)), 10)
    span = m * Eb + 2 * sum(dist.between(layout.entry, n) for n in node_set) / Ev
    windows = {}
    for node in node_set:
        k = int(rng.integers(0, max_windows + 1))
        starts = t0 + TIME_STEP * rng.integers(0, int(span / TIME_STEP) + 1, size=k)
        if k:
            windows[node] = tuple(sorted(round(float(d), 10) for d in starts))
    return RouteInstance.make(node_set, dist, t0, Ev, Eb, BlockedWindowTable(windows, Eb),
                              penalty=penalty)


@dataclass
class CheckReport:
    checked: int = 0
    mismatches: list[str] = field(default_factory=list)
    statuses: dict[str, int] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.mismatches


def oracle_check(n_instances: int = 500, seed: int = 0, max_nodes: int = 8,
                 layout: Layout | None = None, settings: SolverSettings | None = None) -> CheckReport:
    """Every variant's native optimum against exhaustive enumeration in rational arithmetic."""
    if max_nodes > BRUTE_FORCE_CAP:
        raise ValueError(f"max_nodes above the brute-force cap of {BRUTE_FORCE_CAP}")
    layout = layout or default_layout()
    dist = all_pairs_distances(layout)
    rng = np.random.default_rng(seed)
    rep = CheckReport()
    for i in range(n_instances):
        inst = random_instance(rng, layout, dist, max_nodes)
        for variant in Variant:
            got = solve(inst, variant, settings)
            ref = brute_force(inst, variant, exact=True)
            rep.checked += 1
            key = f"{variant.value}:{ref.status.value}"
            rep.statuses[key] = rep.statuses.get(key, 0) + 1
            if got.status is not ref.status or (ref.feasible and got.objective != ref.objective):
                rep.mismatches.append(
                    f"instance {i} {variant.value}: native {got.status.value} {got.objective} "
                    f"vs brute force {ref.status.value} {ref.objective}")
    return rep


def milp_check(n_instances: int = 20, seed: int = 0, max_nodes: int = 5, rel_tol: float = 1e-6,
               layout: Layout | None = None) -> CheckReport:
    """Exported NC/MC models solved by HiGHS against the native router (needs ``highspy``)."""
    from .lpexport import export_milp, solve_lp_text

    layout = layout or default_layout()
    dist = all_pairs_distances(layout)
    rng = np.random.default_rng(seed)
    rep = CheckReport()
    for i in range(n_instances):
        inst = random_instance(rng, layout, dist, max_nodes)
        for variant in (Variant.NC, Variant.MC):
            native = solve(inst, variant)
            status, obj = solve_lp_text(export_milp(inst, variant))
            rep.checked += 1
            key = f"{variant.value}:{native.status.value}"
            rep.statuses[key] = rep.statuses.get(key, 0) + 1
            if native.status is Status.INFEASIBLE:
                bad = obj is not None
            else:
                bad = obj is None or abs(obj - native.objective) > rel_tol * max(1.0, abs(native.objective))
            if bad:
                rep.mismatches.append(f"instance {i} {variant.value}: native {native.status.value} "
                                      f"{native.objective} vs MILP {status} {obj}")
    return rep
