"""Exact route assignment: plain TSP, no-contact (NC) and minimal-contact (MC).

Because a planned route never waits, node arrival times are a fixed function
of the visit order.  The mixed-integer models therefore reduce to a search
over orders, which is done here by depth-first branch and bound:

* a partial tour is a state ``(visited set, last node, distance so far)``;
  the arrival time at the next node and hence its contacts follow from it;
* NC drops a branch as soon as an arrival overlaps a blocked window, MC adds
  ``penalty`` per overlap (contacts of a prefix are final);
* the completion bound is the Held-Karp value of the cheapest path from the
  last node through the unvisited nodes back to the entry (windows ignored),
  or a spanning-tree bound on instances too large for the DP table;
* solved and refuted states are memoised, and the search runs with an
  increasing cost threshold so that the first solution found is the
  lexicographically smallest optimal order.

:func:`brute_force` enumerates every order and serves as the oracle.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
from numba import njit

from .grid import Cell, DistanceMatrix
from .schedule import (BlockedWindowTable, PlannedSchedule, arrival_time, count_overlaps,
                       count_plan_contacts, overlaps, schedule)

INF = math.inf


class Variant(str, Enum):
    TSP = "tsp"
    NC = "nc"
    MC = "mc"


class Status(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"


class SolverLimitError(RuntimeError):
    pass


@dataclass(frozen=True)
class SolverSettings:
    size_cap: int = 24            # non-entry nodes
    dp_limit: int = 18            # largest instance that gets the Held-Karp bound
    time_limit: float | None = 60.0   # seconds
    node_limit: int | None = 5_000_000  # expanded states


@dataclass(frozen=True, eq=False)
class RouteInstance:
    nodes: tuple[Cell, ...]       # entry first, then the node set in (row, col) order
    dist: DistanceMatrix
    t0: float
    Ev: float
    Eb: float
    windows: BlockedWindowTable
    penalty: float = 1000.0
    big_m: float | None = None

    def __post_init__(self):
        if not self.nodes or self.nodes[0] != self.dist.cells[0]:
            raise ValueError("instance nodes must start with the entry")
        if len(set(self.nodes)) != len(self.nodes):
            raise ValueError("duplicate nodes in instance")
        if self.t0 < 0:
            raise ValueError("t0 must be non-negative")
        if not self.penalty > 0:
            raise ValueError("penalty must be positive")
        if not (self.Ev > 0 and self.Eb > 0):
            raise ValueError("Ev and Eb must be positive")
        # restrict windows to this instance; the entry never carries windows
        own = {n: tuple(sorted(self.windows.at(n))) for n in self.nodes[1:] if self.windows.at(n)}
        object.__setattr__(self, "windows", BlockedWindowTable(own, self.Eb))

    @classmethod
    def make(cls, node_set: Iterable[Cell], dist: DistanceMatrix, t0: float, Ev: float, Eb: float,
             windows: BlockedWindowTable | None = None, **kwargs) -> "RouteInstance":
        entry = dist.cells[0]
        nodes = sorted(set(node_set) - {entry})
        windows = windows if windows is not None else BlockedWindowTable({}, Eb)
        return cls((entry, *nodes), dist, t0, Ev, Eb, windows, **kwargs)

    @property
    def size(self) -> int:
        return len(self.nodes) - 1

    def local_matrix(self) -> list[list[float]]:
        idx = [self.dist.index[c] for c in self.nodes]
        rows = self.dist.rows
        return [[rows[i][j] for j in idx] for i in idx]


@dataclass
class RouteSolution:
    status: Status
    order: tuple[Cell, ...] | None
    sched: PlannedSchedule | None
    tour_length: float
    planned_contacts: int
    objective: float
    variant: Variant
    expanded: int = 0
    runtime: float = 0.0
    limit_hit: bool = False
    inspected: int = 0            # brute force only

    @property
    def feasible(self) -> bool:
        return self.status is Status.OPTIMAL


def _solution(inst: RouteInstance, variant: Variant, order: Sequence[Cell] | None, **extra) -> RouteSolution:
    if order is None:
        return RouteSolution(Status.INFEASIBLE, None, None, INF, 0, INF, variant, **extra)
    sched = schedule(order, inst.t0, inst.Ev, inst.Eb, inst.dist)
    contacts = count_plan_contacts(sched, inst.windows)
    objective = sched.tour_length
    if variant is Variant.MC:
        objective += inst.penalty * contacts
    return RouteSolution(Status.OPTIMAL, tuple(order), sched, sched.tour_length, contacts,
                         objective, variant, **extra)


# ---------------------------------------------------------------------------
# completion bounds

@njit(cache=True)
def _held_karp(Cn):
    m = Cn.shape[0] - 1
    full = 1 << m
    dp = np.full((full, m), np.inf)
    # subsets are visited in increasing order, so S without j is always ready
    for S in range(1, full):
        for j in range(m):
            bj = 1 << j
            if not S & bj:
                continue
            P = S ^ bj
            if P == 0:
                dp[S, j] = Cn[0, j + 1]
                continue
            best = np.inf
            for i in range(m):
                if (P >> i) & 1:
                    v = dp[P, i] + Cn[i + 1, j + 1]
                    if v < best:
                        best = v
            dp[S, j] = best
    return dp


def held_karp_table(C: Sequence[Sequence[float]]) -> np.ndarray:
    """``dp[S, j]``: shortest path from the entry (local 0) through node set ``S`` ending at ``j``.

    Non-entry node ``i`` (local index ``i >= 1``) is bit ``i - 1`` of ``S``.
    """
    return _held_karp(np.asarray(C, dtype=np.float64))


def _mst_weight(points: Sequence[int], C: Sequence[Sequence[float]]) -> float:
    if len(points) < 2:
        return 0.0
    first, rest = points[0], list(points[1:])
    key = {p: C[first][p] for p in rest}
    total = 0.0
    while key:
        p = min(key, key=key.__getitem__)
        total += key.pop(p)
        row = C[p]
        for q in key:
            if row[q] < key[q]:
                key[q] = row[q]
    return total


class _Limit(Exception):
    pass


class _Search:
    def __init__(self, inst: RouteInstance, variant: Variant, settings: SolverSettings):
        self.inst = inst
        self.variant = variant
        self.settings = settings
        self.m = inst.size
        self.C = inst.local_matrix()
        self.full = (1 << self.m) - 1
        self.windows = [()] + [inst.windows.at(n) for n in inst.nodes[1:]]
        self.expanded = 0
        self.started = time.perf_counter()
        self.exact: dict = {}
        self.lower: dict = {}
        self._bound_cache: dict = {}
        self.dp = held_karp_table(self.C) if self.m <= settings.dp_limit else None

    # bounds -----------------------------------------------------------------
    def completion_bound(self, remaining: int, last: int) -> float:
        """Admissible bound on the length of last -> all of ``remaining`` -> entry."""
        C = self.C
        if remaining == 0:
            return C[last][0]
        if self.dp is not None:
            if last == 0:
                row = self.dp[remaining]
                return min(row[j] + C[j + 1][0] for j in range(self.m) if remaining >> j & 1)
            return self.dp.item(remaining | (1 << (last - 1)), last - 1)
        key = (remaining, last)
        val = self._bound_cache.get(key)
        if val is None:
            pts = [last, 0] + [j + 1 for j in range(self.m) if remaining >> j & 1]
            val = _mst_weight(pts if last else pts[1:], C)
            self._bound_cache[key] = val
        return val

    # search -------------------------------------------------------------------
    def _tick(self):
        self.expanded += 1
        s = self.settings
        if s.node_limit is not None and self.expanded > s.node_limit:
            raise _Limit
        if s.time_limit is not None and self.expanded & 1023 == 0:
            if time.perf_counter() - self.started > s.time_limit:
                raise _Limit

    def _complete(self, visited: int, last: int, travelled: float, budget: float) -> float:
        """Cheapest completion cost if it is below ``budget``, else a lower bound >= budget."""
        if visited == self.full:
            return self.C[last][0]
        key = (visited, last, travelled if self.variant is not Variant.TSP else 0)
        hit = self.exact.get(key)
        if hit is not None:
            return hit[0]
        known = self.lower.get(key, 0.0)
        if known >= budget:
            return known
        self._tick()

        inst = self.inst
        t0, Eb, Ev = inst.t0, inst.Eb, inst.Ev
        nc = self.variant is Variant.NC
        mc = self.variant is Variant.MC
        row = self.C[last]
        position = bin(visited).count("1") + 1
        best, best_j, floor = INF, -1, INF
        for j in range(1, self.m + 1):
            bit = 1 << (j - 1)
            if visited & bit:
                continue
            step = row[j]
            reach = travelled + step
            if self.variant is not Variant.TSP:
                hits = count_overlaps(arrival_time(t0, position, reach, Eb, Ev), self.windows[j], Eb)
                if hits:
                    if nc:
                        continue
                    step += inst.penalty * hits
            cut = budget if best > budget else best
            bound = step + self.completion_bound(self.full & ~(visited | bit), j)
            if bound >= cut:
                if bound < floor:
                    floor = bound
                continue
            total = step + self._complete(visited | bit, j, reach, cut - step)
            if total < cut:
                best, best_j = total, j
            elif total < floor:
                floor = total
        if best < budget:
            self.exact[key] = (best, best_j)
            return best
        floor = min(floor, best)
        if floor > known:
            self.lower[key] = floor
        return floor

    def run(self) -> list[int] | None:
        """Lexicographically smallest optimal order as local indices, ``None`` if infeasible."""
        threshold = self.completion_bound(self.full, 0)
        while threshold < INF:
            budget = threshold + 1e-7 * max(1.0, abs(threshold))
            value = self._complete(0, 0, 0, budget)
            if value < budget:
                return self._path()
            threshold = value
        return None

    def _path(self) -> list[int]:
        order = [0]
        visited, last, travelled = 0, 0, 0
        while visited != self.full:
            key = (visited, last, travelled if self.variant is not Variant.TSP else 0)
            j = self.exact[key][1]
            travelled += self.C[last][j]
            visited |= 1 << (j - 1)
            last = j
            order.append(j)
        return order


def _fallback_order(inst: RouteInstance, variant: Variant, search: _Search) -> list[int] | None:
    """Best of a few cheap candidate orders, used when the search runs out of budget."""
    C = search.C
    candidates = []
    # nearest-neighbour tour
    order, left = [0], set(range(1, inst.size + 1))
    while left:
        nxt = min(left, key=lambda j: (C[order[-1]][j], j))
        left.discard(nxt)
        order.append(nxt)
    candidates.append(order)
    candidates.append(list(range(inst.size + 1)))
    best, best_key = None, None
    for cand in candidates:
        sol = _solution(inst, variant, [inst.nodes[i] for i in cand])
        if variant is Variant.NC and sol.planned_contacts:
            continue
        key = (sol.objective, cand)
        if best_key is None or key < best_key:
            best, best_key = cand, key
    return best


def _solve(inst: RouteInstance, variant: Variant, settings: SolverSettings | None) -> RouteSolution:
    settings = settings or SolverSettings()
    if inst.size < 1:
        raise ValueError("instance needs at least one non-entry node")
    if inst.size > settings.size_cap:
        raise SolverLimitError(f"instance has {inst.size} nodes, above the exact-size cap "
                               f"of {settings.size_cap}")
    search = _Search(inst, variant, settings)
    limit_hit = False
    try:
        local = search.run()
    except _Limit:
        limit_hit = True
        local = _fallback_order(inst, variant, search)
    order = None if local is None else [inst.nodes[i] for i in local]
    return _solution(inst, variant, order, expanded=search.expanded,
                     runtime=time.perf_counter() - search.started, limit_hit=limit_hit)


def solve_tsp(inst: RouteInstance, settings: SolverSettings | None = None) -> RouteSolution:
    """Shortest closed tour; contacts against the windows are reported, not penalised."""
    return _solve(inst, Variant.TSP, settings)


def solve_tsp_nc(inst: RouteInstance, settings: SolverSettings | None = None) -> RouteSolution:
    """Shortest tour whose planned visits overlap no blocked window (may be infeasible)."""
    return _solve(inst, Variant.NC, settings)


def solve_tsp_mc(inst: RouteInstance, settings: SolverSettings | None = None) -> RouteSolution:
    """Minimise tour length plus ``penalty`` per planned overlap."""
    return _solve(inst, Variant.MC, settings)


SOLVERS = {Variant.TSP: solve_tsp, Variant.NC: solve_tsp_nc, Variant.MC: solve_tsp_mc}


def solve(inst: RouteInstance, variant: Variant | str, settings: SolverSettings | None = None) -> RouteSolution:
    return SOLVERS[Variant(variant)](inst, settings)


def completion_lower_bound(inst: RouteInstance, prefix: Sequence[Cell],
                           settings: SolverSettings | None = None) -> float:
    """The solver's bound on the distance still to travel after visiting ``prefix``."""
    search = _Search(inst, Variant.TSP, settings or SolverSettings())
    local = {c: i for i, c in enumerate(inst.nodes)}
    visited = 0
    for c in prefix[1:]:
        visited |= 1 << (local[c] - 1)
    return search.completion_bound(search.full & ~visited, local[prefix[-1]])


# ---------------------------------------------------------------------------
# exhaustive oracle

BRUTE_FORCE_CAP = 9


def _exact(x) -> Fraction | int:
    if isinstance(x, (int, np.integer)) or float(x).is_integer():
        return int(x)     # plain ints keep the enumeration fast
    return Fraction(repr(float(x)))


def brute_force(inst: RouteInstance, variant: Variant | str, *, exact: bool = False) -> RouteSolution:
    """Enumerate every visit order; ties go to the lexicographically smallest order.

    With ``exact=True`` all times are evaluated in rational arithmetic from the
    decimal values of the inputs, independently of the floating-point path.
    Orders are enumerated depth first so prefixes are shared; nothing is pruned.
    """
    variant = Variant(variant)
    if inst.size > BRUTE_FORCE_CAP:
        raise SolverLimitError(f"brute force is limited to {BRUTE_FORCE_CAP} nodes")
    entry, rest = inst.nodes[0], inst.nodes[1:]
    num = _exact if exact else float
    t0, Eb, Ev, pen = (num(v) for v in (inst.t0, inst.Eb, inst.Ev, inst.penalty))
    wins = {n: [num(d) for d in inst.windows.at(n)] for n in rest}
    c = {(a, b): _exact(inst.dist.between(a, b)) if exact else float(inst.dist.between(a, b))
         for a in inst.nodes for b in inst.nodes}
    hit_memo: dict = {}

    def hits(node, position, travelled):
        key = (node, position, travelled)
        if key not in hit_memo:
            if exact:
                t = t0 + position * Eb + travelled / Ev
                hit_memo[key] = sum(1 for d in wins[node] if abs(t - d) < Eb)
            else:
                t = arrival_time(t0, position, travelled, Eb, Ev)
                hit_memo[key] = sum(overlaps(t, d, Eb) for d in wins[node])
        return hit_memo[key]

    best: list = [None, None]
    inspected = 0
    path = [entry]

    def walk(remaining, travelled, total_hits):
        nonlocal inspected
        if not remaining:
            inspected += 1
            length = travelled + c[path[-1], entry]
            if variant is Variant.NC and total_hits:
                return
            cost = length + pen * total_hits if variant is Variant.MC else length
            if best[0] is None or cost < best[0]:
                best[0], best[1] = cost, tuple(path)
            return
        for idx, node in enumerate(remaining):
            step = travelled + c[path[-1], node]
            path.append(node)
            walk(remaining[:idx] + remaining[idx + 1:], step,
                 total_hits + hits(node, len(path) - 1, step))
            path.pop()

    walk(rest, 0, 0)
    sol = _solution(inst, variant, best[1], inspected=inspected)
    if best[1] is not None and exact:
        # report the exact-arithmetic objective alongside the float schedule
        sol.objective = float(best[0])
    return sol
