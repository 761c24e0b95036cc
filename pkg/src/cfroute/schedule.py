"""Planned schedules, blocked windows and the overlap predicate.

A route is planned with expected values only and without waiting, so node
arrival times are a fixed function of the visit order::

    t_k = t0 + k * Eb + L_k / Ev

where ``k`` is the position in the order (entry is position 0) and ``L_k``
the travelled distance so far.  Solver, oracle and simulator all evaluate
this through :func:`arrival_time` so that they agree to the last bit.
"""

from __future__ import annotations

from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .grid import Cell, DistanceMatrix

# Overlaps shorter than this (minutes) are treated as touching intervals.
TOUCH_TOL = 1e-9


def arrival_time(t0: float, position: int, travelled: float, Eb: float, Ev: float) -> float:
    return t0 + position * Eb + travelled / Ev


def overlaps(t: float, d: float, Eb: float) -> bool:
    """True iff ``[t, t+Eb)`` and ``[d, d+Eb)`` overlap with positive length."""
    if not Eb > 0:
        raise ValueError("Eb must be positive")
    return abs(t - d) < Eb - TOUCH_TOL


def count_overlaps(t: float, starts: Sequence[float], Eb: float) -> int:
    """Number of window starts in ``starts`` (sorted) overlapping an occupancy at ``t``."""
    if not starts:
        return 0
    width = Eb - TOUCH_TOL
    lo = bisect_right(starts, t - width)
    hi = bisect_left(starts, t + width)
    return max(hi - lo, 0)


@dataclass(frozen=True)
class PlannedSchedule:
    order: tuple[Cell, ...]          # entry first, return to entry implied
    arrivals: tuple[float, ...]      # arrivals[0] == t0 at the entry
    Eb: float
    Ev: float
    tour_length: float
    exit_time: float

    @property
    def t0(self) -> float:
        return self.arrivals[0]

    def visits(self):
        """(node, planned arrival) pairs, entry excluded."""
        return zip(self.order[1:], self.arrivals[1:])


def validate_order(order: Sequence[Cell], dist: DistanceMatrix,
                   node_set: Iterable[Cell] | None = None) -> None:
    if len(order) < 2:
        raise ValueError("a visit order needs the entry and at least one node")
    if order[0] != dist.cells[0]:
        raise ValueError("visit order must start at the entry")
    if len(set(order)) != len(order):
        raise ValueError("visit order repeats a node")
    unknown = [c for c in order if c not in dist.index]
    if unknown:
        raise ValueError(f"{unknown[0]} is not a node cell")
    if node_set is not None and set(order[1:]) != set(node_set):
        raise ValueError("visit order does not cover the node set")


def schedule(order: Sequence[Cell], t0: float, Ev: float, Eb: float,
             dist: DistanceMatrix) -> PlannedSchedule:
    validate_order(order, dist)
    idx = [dist.index[c] for c in order]
    arrivals = [t0]
    travelled = 0
    for k in range(1, len(idx)):
        travelled += dist.rows[idx[k - 1]][idx[k]]
        arrivals.append(arrival_time(t0, k, travelled, Eb, Ev))
    length = travelled + dist.rows[idx[-1]][idx[0]]
    exit_time = arrival_time(t0, len(idx), length, Eb, Ev)
    return PlannedSchedule(tuple(order), tuple(arrivals), Eb, Ev,
                           float(length), exit_time)


@dataclass(frozen=True)
class BlockedWindowTable:
    """Per-node sorted occupancy start times of other agents' plans."""

    starts: Mapping[Cell, tuple[float, ...]]
    Eb: float

    def at(self, node: Cell) -> tuple[float, ...]:
        return self.starts.get(node, ())

    def __len__(self) -> int:
        return sum(len(v) for v in self.starts.values())


def blocked_windows(active_plans: Iterable, t0: float, Eb: float | None = None) -> BlockedWindowTable:
    """Collect planned occupancy starts of every plan still in the network at ``t0``.

    ``active_plans`` holds :class:`PlannedSchedule` objects or anything with a
    ``planned`` attribute.  ``Eb`` defaults to the plans' own dwell value.
    """
    starts: dict[Cell, list[float]] = {}
    for p in active_plans:
        sched = getattr(p, "planned", p)
        if Eb is None:
            Eb = sched.Eb
        if not sched.exit_time > t0:
            continue
        for node, t in sched.visits():
            starts.setdefault(node, []).append(t)
    if Eb is None:
        Eb = 1.0
    return BlockedWindowTable({n: tuple(sorted(v)) for n, v in starts.items()}, Eb)


def count_plan_contacts(sched: PlannedSchedule, table: BlockedWindowTable) -> int:
    return sum(count_overlaps(t, table.at(node), sched.Eb) for node, t in sched.visits())
