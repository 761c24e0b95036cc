"""Benchmark traversal patterns: greedy and preferential section sweeps."""

from __future__ import annotations

from typing import Iterable, Sequence

from .grid import Cell, DistanceMatrix, Layout
from .stochastics import RandomStream


def _nearest(current: Cell, candidates: Iterable[Cell], dist: DistanceMatrix) -> Cell:
    # ties go to the lexicographically smallest (row, col)
    row = dist.rows[dist.index[current]]
    return min(candidates, key=lambda c: (row[dist.index[c]], c))


def _sweep_section(current: Cell, members: set[Cell], dist: DistanceMatrix, out: list[Cell]) -> Cell:
    while members:
        current = _nearest(current, members, dist)
        members.discard(current)
        out.append(current)
    return current


def _by_section(node_set: Iterable[Cell], layout: Layout) -> dict[str, set[Cell]]:
    groups: dict[str, set[Cell]] = {}
    for node in node_set:
        if node == layout.entry:
            raise ValueError("the entry cannot be part of a node set")
        groups.setdefault(layout.section_of(node), set()).add(node)
    return groups


def greedy_route(node_set: Iterable[Cell], layout: Layout, dist: DistanceMatrix) -> tuple[Cell, ...]:
    """Closest section first, nearest-neighbour sweep inside each section."""
    groups = _by_section(node_set, layout)
    if not groups:
        raise ValueError("empty node set")
    order = [layout.entry]
    current = layout.entry
    while groups:
        # a section's distance is that of its nearest required node
        target = _nearest(current, (n for g in groups.values() for n in g), dist)
        section = layout.section_of(target)
        current = _sweep_section(current, groups.pop(section), dist, order)
    return tuple(order)


def node_set_sections(node_set: Iterable[Cell], layout: Layout) -> set[str]:
    return {layout.section_of(n) for n in node_set}


def preferential_route(node_set: Iterable[Cell], preference: Sequence[str], layout: Layout,
                       dist: DistanceMatrix) -> tuple[Cell, ...]:
    """Sections in the agent's preferred order, nearest-neighbour inside each."""
    groups = _by_section(node_set, layout)
    if not groups:
        raise ValueError("empty node set")
    if len(set(preference)) != len(preference):
        raise ValueError("section preference repeats a section")
    if set(preference) != set(groups):
        raise ValueError(
            f"preference {list(preference)} does not match node-set sections {sorted(groups)}")
    order = [layout.entry]
    current = layout.entry
    for section in preference:
        current = _sweep_section(current, groups[section], dist, order)
    return tuple(order)


def sample_preference(node_set: Iterable[Cell], layout: Layout, rng: RandomStream) -> tuple[str, ...]:
    """Uniformly random ordering of the node set's sections."""
    sections = sorted(node_set_sections(node_set, layout))
    perm = rng.gen.permutation(len(sections))
    return tuple(sections[i] for i in perm)
