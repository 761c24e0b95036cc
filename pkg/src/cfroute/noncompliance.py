"""Deviation from assigned routes.

Type A: at some node the agent heads for a closer node of its own set than
the next assigned one, then finishes the rest nearest-neighbour style.
Type B: same detour, but the agent returns to the next assigned node and
keeps following the route (skipping the node it already visited); it may
deviate again later.
Type C: after an assigned node the agent may step into an adjacent node cell
outside its node set before going on to the next assigned node.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .grid import Cell, DistanceMatrix, Layout, node_neighbors
from .stochastics import RandomStream


class Compliance(str, Enum):
    COMPLIANT = "compliant"
    TYPE_A = "a"
    TYPE_B = "b"
    TYPE_C = "c"


class VisitKind(str, Enum):
    ASSIGNED = "assigned"
    GREEDY_DEVIATION = "greedy"
    NEIGHBOR_DETOUR = "detour"


@dataclass(frozen=True)
class ComplianceProfile:
    mode: Compliance = Compliance.COMPLIANT
    type_c_prob: float = 0.2

    def __post_init__(self):
        if not 0 <= self.type_c_prob <= 1:
            raise ValueError("type_c_prob must lie in [0, 1]")


ExecutedSequence = tuple[tuple[Cell, VisitKind], ...]


def deviation_probability(d_ij: float, d_ik: float) -> float:
    """Chance of leaving for the greedy node k instead of the next assigned node j."""
    if not (d_ij > 0 and d_ik > 0):
        raise ValueError("distances must be positive")
    if d_ij <= d_ik:
        return 0.0
    return 1.0 - d_ik / d_ij


def _nearest(cur: Cell, candidates: Sequence[Cell], dist: DistanceMatrix) -> Cell:
    row = dist.rows[dist.index[cur]]
    return min(candidates, key=lambda c: (row[dist.index[c]], c))


def _deviates(cur: Cell, j: Cell, k: Cell, dist: DistanceMatrix, rng: RandomStream) -> bool:
    u = rng.uniform()
    return u < deviation_probability(dist.between(cur, j), dist.between(cur, k))


def realize_type_a(order: Sequence[Cell], dist: DistanceMatrix, rng: RandomStream) -> ExecutedSequence:
    seq = [(order[0], VisitKind.ASSIGNED)]
    remaining = list(order[1:])
    cur = order[0]
    while remaining:
        j, others = remaining[0], remaining[1:]
        if others:
            k = _nearest(cur, others, dist)
            if _deviates(cur, j, k, dist, rng):
                # route abandoned: nearest-neighbour over everything left
                left = set(remaining)
                while left:
                    cur = _nearest(cur, sorted(left), dist)
                    left.discard(cur)
                    seq.append((cur, VisitKind.GREEDY_DEVIATION))
                break
        seq.append((j, VisitKind.ASSIGNED))
        remaining.pop(0)
        cur = j
    return tuple(seq)


def realize_type_b(order: Sequence[Cell], dist: DistanceMatrix, rng: RandomStream) -> ExecutedSequence:
    seq = [(order[0], VisitKind.ASSIGNED)]
    remaining = list(order[1:])
    cur = order[0]
    while remaining:
        j, others = remaining[0], remaining[1:]
        if others:
            k = _nearest(cur, others, dist)
            if _deviates(cur, j, k, dist, rng):
                seq.append((k, VisitKind.GREEDY_DEVIATION))
                remaining.remove(k)
        seq.append((j, VisitKind.ASSIGNED))
        remaining.pop(0)
        cur = j
    return tuple(seq)


def realize_type_c(order: Sequence[Cell], layout: Layout, rng: RandomStream,
                   type_c_prob: float = 0.2) -> ExecutedSequence:
    node_set = set(order[1:])
    seq = [(order[0], VisitKind.ASSIGNED)]
    for node in order[1:]:
        seq.append((node, VisitKind.ASSIGNED))
        u = rng.uniform()
        eligible = sorted(node_neighbors(layout, node) - node_set - {layout.entry})
        if eligible and u < type_c_prob:
            seq.append((eligible[rng.integers(len(eligible))], VisitKind.NEIGHBOR_DETOUR))
    return tuple(seq)


def realize_sequence(order: Sequence[Cell], profile: ComplianceProfile, layout: Layout,
                     dist: DistanceMatrix, rng: RandomStream) -> ExecutedSequence:
    mode = profile.mode
    if mode is Compliance.TYPE_A:
        return realize_type_a(order, dist, rng)
    if mode is Compliance.TYPE_B:
        return realize_type_b(order, dist, rng)
    if mode is Compliance.TYPE_C:
        return realize_type_c(order, layout, rng, profile.type_c_prob)
    return tuple((n, VisitKind.ASSIGNED) for n in order)
