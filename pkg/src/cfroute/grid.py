"""Cell-grid network: layout parsing, sections and shortest-path distances.

Layout files are plain text, one line per grid row::

    # comment
    E..bbcc
    .......

``.`` is an aisle, ``a``..``i`` a node cell of that section and ``E`` the
entry/exit node.  ``X`` marks an impassable cell (not part of the default
layout, but handy for modelling walls).  Movement is 4-connected through
every passable cell, node or aisle, and each step costs one cell size.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from importlib import resources
from typing import NamedTuple

import numpy as np

SECTION_LABELS = "abcdefghi"
AISLE = "."
ENTRY = "E"
WALL = "X"


class LayoutError(ValueError):
    pass


class Cell(NamedTuple):
    """1-based (row, col) grid coordinate."""

    row: int
    col: int

    def __str__(self) -> str:
        return f"({self.row},{self.col})"


@dataclass(frozen=True)
class Layout:
    rows: int
    cols: int
    entry: Cell
    sections: dict[Cell, str]
    walls: frozenset[Cell] = frozenset()
    cell_size: float = 5.0
    entry_section: str = "a"
    # entry first, then the remaining nodes in (row, col) order
    nodes: tuple[Cell, ...] = field(init=False)

    def __post_init__(self):
        others = sorted(c for c in self.sections if c != self.entry)
        object.__setattr__(self, "nodes", (self.entry, *others))

    @property
    def node_set(self) -> frozenset[Cell]:
        return frozenset(self.nodes)

    @property
    def non_entry_nodes(self) -> tuple[Cell, ...]:
        return self.nodes[1:]

    def is_node(self, cell: Cell) -> bool:
        return cell in self.sections

    def section_of(self, cell: Cell) -> str:
        return self.sections[cell]

    def passable(self, cell: Cell) -> bool:
        return (1 <= cell.row <= self.rows and 1 <= cell.col <= self.cols
                and cell not in self.walls)

    def char_at(self, cell: Cell) -> str:
        if cell == self.entry:
            return ENTRY
        if cell in self.walls:
            return WALL
        return self.sections.get(cell, AISLE)

    def relabel(self, mapping: dict[str, str]) -> "Layout":
        """Copy of the layout with section labels renamed through ``mapping``."""
        sections = {c: mapping.get(s, s) for c, s in self.sections.items()}
        return Layout(self.rows, self.cols, self.entry, sections, self.walls,
                      self.cell_size, mapping.get(self.entry_section, self.entry_section))


def _grid_neighbors(cell: Cell):
    r, c = cell
    yield Cell(r - 1, c)
    yield Cell(r + 1, c)
    yield Cell(r, c - 1)
    yield Cell(r, c + 1)


def _bfs_steps(layout: Layout, source: Cell) -> dict[Cell, int]:
    steps = {source: 0}
    queue = deque([source])
    while queue:
        cur = queue.popleft()
        for nxt in _grid_neighbors(cur):
            if nxt not in steps and layout.passable(nxt):
                steps[nxt] = steps[cur] + 1
                queue.append(nxt)
    return steps


def parse_layout(text: str, *, cell_size: float = 5.0, entry_section: str = "a",
                 expected_nodes: int | None = None) -> Layout:
    """Parse layout-file text into a validated :class:`Layout`."""
    lines = [ln.rstrip("\r\n") for ln in text.splitlines()]
    lines = [ln.strip() for ln in lines if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise LayoutError("empty layout")
    width = len(lines[0])
    if any(len(ln) != width for ln in lines):
        raise LayoutError("layout is not rectangular")
    if entry_section not in SECTION_LABELS:
        raise LayoutError(f"unknown entry section {entry_section!r}")

    entry = None
    sections: dict[Cell, str] = {}
    walls = set()
    for r, line in enumerate(lines, start=1):
        for c, ch in enumerate(line, start=1):
            cell = Cell(r, c)
            if ch == ENTRY:
                if entry is not None:
                    raise LayoutError(f"duplicate entry marker at {cell}")
                entry = cell
                sections[cell] = entry_section
            elif ch in SECTION_LABELS:
                sections[cell] = ch
            elif ch == WALL:
                walls.add(cell)
            elif ch != AISLE:
                raise LayoutError(f"unexpected character {ch!r} at {cell}")
    if entry is None:
        raise LayoutError("no entry marker 'E'")

    layout = Layout(len(lines), width, entry, sections, frozenset(walls),
                    cell_size, entry_section)
    _validate(layout, expected_nodes)
    return layout


def _validate(layout: Layout, expected_nodes: int | None) -> None:
    if expected_nodes is not None and len(layout.nodes) != expected_nodes:
        raise LayoutError(f"expected {expected_nodes} node cells, found {len(layout.nodes)}")

    reach = _bfs_steps(layout, layout.entry)
    free = [Cell(r, c) for r in range(1, layout.rows + 1)
            for c in range(1, layout.cols + 1) if Cell(r, c) not in layout.walls]
    missing = [c for c in free if c not in reach]
    if missing:
        raise LayoutError(f"layout is disconnected: {missing[0]} unreachable from entry")

    # each section's bounding box must be a block that no other section enters
    boxes = {}
    for cell, label in layout.sections.items():
        r0, r1, c0, c1 = boxes.get(label, (cell.row, cell.row, cell.col, cell.col))
        boxes[label] = (min(r0, cell.row), max(r1, cell.row),
                        min(c0, cell.col), max(c1, cell.col))
    for cell, label in layout.sections.items():
        for other, (r0, r1, c0, c1) in boxes.items():
            if other != label and r0 <= cell.row <= r1 and c0 <= cell.col <= c1:
                raise LayoutError(
                    f"section {other!r} is not a rectangular block: {cell} belongs to {label!r}")


def serialize_layout(layout: Layout) -> str:
    rows = ["".join(layout.char_at(Cell(r, c)) for c in range(1, layout.cols + 1))
            for r in range(1, layout.rows + 1)]
    return "\n".join(rows) + "\n"


def load_layout(path=None, **kwargs) -> Layout:
    """Load a layout file; ``None`` loads the shipped 10 x 7 default."""
    if path is None:
        text = resources.files("cfroute.data").joinpath("default_layout.txt").read_text()
        kwargs.setdefault("expected_nodes", 35)
    else:
        with open(path) as fh:
            text = fh.read()
    return parse_layout(text, **kwargs)


def default_layout() -> Layout:
    return load_layout()


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    """Shortest-path lengths in meters between node cells.

    Index 0 is the entry; the rest follow ``Layout.nodes``.
    """

    cells: tuple[Cell, ...]
    c: np.ndarray
    index: dict[Cell, int] = field(init=False, repr=False)
    rows: list = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "index", {cell: i for i, cell in enumerate(self.cells)})
        object.__setattr__(self, "rows", self.c.tolist())
        self.c.setflags(write=False)

    @property
    def n(self) -> int:
        return len(self.cells)

    def between(self, a: Cell, b: Cell) -> float:
        return self.rows[self.index[a]][self.index[b]]


def all_pairs_distances(layout: Layout) -> DistanceMatrix:
    cells = layout.nodes
    n = len(cells)
    c = np.zeros((n, n), dtype=np.int64)
    for i, src in enumerate(cells):
        steps = _bfs_steps(layout, src)
        for j, dst in enumerate(cells):
            c[i, j] = steps[dst]
    # cell sizes are whole meters in practice; keep integer arithmetic when possible
    size = layout.cell_size
    if float(size).is_integer():
        c = c * int(size)
    else:
        c = c.astype(float) * size
    return DistanceMatrix(cells, c)


def node_neighbors(layout: Layout, node: Cell) -> set[Cell]:
    """Node cells sharing an edge with ``node``."""
    if not layout.is_node(node):
        raise LayoutError(f"{node} is not a node cell")
    return {nb for nb in _grid_neighbors(node) if layout.is_node(nb)}
