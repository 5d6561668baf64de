"""Gridworld maps and their MDPs.

Map documents are UTF-8 text: optional ``key = value`` header lines, a blank
line, then a rectangular character map drawn with north at the top::

    wind_north = 0.1
    wind_west = 0.1

    ..T
    .#.
    S..

``#`` is a wall, ``S`` the start, ``T`` the target and ``.`` a free cell.
States are numbered row by row from the bottom-left corner, skipping walls;
one extra absorbing state is appended after the last cell.
"""
from collections import deque
from dataclasses import dataclass, field
from importlib import resources
from typing import Dict, List, Optional, Tuple

import numpy as np

from .mdp import MdpModel

ACTIONS = ("north", "south", "east", "west")
NORTH, SOUTH, EAST, WEST = range(4)
# (d_row, d_col) with rows counted from the top of the map
_MOVES = {NORTH: (-1, 0), SOUTH: (1, 0), EAST: (0, 1), WEST: (0, -1)}
_ALPHABET = set("#ST.")
_FLOAT_KEYS = ("wind_north", "wind_west", "step_cost", "beta")
_INT_KEYS = ("t_bar",)

CASE_STUDY_WIND = 0.1


class MapParseError(ValueError):
    def __init__(self, message, line=None, column=None):
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(where + message)
        self.line = line
        self.column = column


@dataclass(frozen=True)
class GridSpec:
    cells: Tuple[str, ...]
    wind_north: float = 0.0
    wind_west: float = 0.0
    step_cost: float = 10.0
    t_bar: Optional[int] = None
    beta: Optional[float] = None

    @property
    def rows(self) -> int:
        return len(self.cells)

    @property
    def cols(self) -> int:
        return len(self.cells[0]) if self.cells else 0

    def find(self, ch: str) -> Tuple[int, int]:
        for r, line in enumerate(self.cells):
            c = line.find(ch)
            if c >= 0:
                return r, c
        raise KeyError(ch)

    def is_free(self, r: int, c: int) -> bool:
        return 0 <= r < self.rows and 0 <= c < self.cols and self.cells[r][c] != "#"

    def with_wind(self, north: float, west: float) -> "GridSpec":
        return validate_spec(
            GridSpec(self.cells, north, west, self.step_cost, self.t_bar, self.beta)
        )


@dataclass(frozen=True)
class StateIndexing:
    cell_to_state: Dict[Tuple[int, int], int]
    state_to_cell: List[Tuple[int, int]] = field(default_factory=list)
    absorbing_state: int = 0
    start_state: int = 0
    target_state: int = 0

    @property
    def num_states(self) -> int:
        return self.absorbing_state + 1


def _reachable(spec: GridSpec, start, goal) -> bool:
    seen = {start}
    queue = deque([start])
    while queue:
        r, c = queue.popleft()
        if (r, c) == goal:
            return True
        for dr, dc in _MOVES.values():
            nxt = (r + dr, c + dc)
            if nxt not in seen and spec.is_free(*nxt):
                seen.add(nxt)
                queue.append(nxt)
    return False


def validate_spec(spec: GridSpec, line_offset: int = 0) -> GridSpec:
    """Check map invariants; ``line_offset`` shifts reported line numbers."""
    if not spec.cells or not spec.cells[0]:
        raise MapParseError("map is empty")
    for i, line in enumerate(spec.cells):
        if len(line) != spec.cols:
            raise MapParseError(f"ragged row: expected {spec.cols} cells, found {len(line)}", line=line_offset + i + 1)
        for j, ch in enumerate(line):
            if ch not in _ALPHABET:
                raise MapParseError(f"unknown map character {ch!r}", line=line_offset + i + 1, column=j + 1)
    for ch, name in (("S", "start"), ("T", "target")):
        count = sum(line.count(ch) for line in spec.cells)
        if count != 1:
            raise MapParseError(f"map must contain exactly one {name} cell '{ch}', found {count}")
    for name in ("wind_north", "wind_west"):
        val = getattr(spec, name)
        if not 0.0 <= val <= 1.0:
            raise MapParseError(f"{name} must lie in [0, 1], got {val}")
    if spec.wind_north + spec.wind_west > 1.0:
        raise MapParseError("wind_north + wind_west must not exceed 1")
    if not (np.isfinite(spec.step_cost) and spec.step_cost >= 0.0):
        raise MapParseError(f"step_cost must be finite and nonnegative, got {spec.step_cost}")
    if not _reachable(spec, spec.find("S"), spec.find("T")):
        r, c = spec.find("T")
        raise MapParseError("target is unreachable from the start", line=line_offset + r + 1, column=c + 1)
    return spec


def parse_map(text: str) -> GridSpec:
    """Parse a map document into a validated :class:`GridSpec`.

    Line numbers in errors refer to the document, header included.
    """
    lines = text.replace("\r\n", "\n").split("\n")
    header: Dict[str, object] = {}
    body_start = 0
    if lines and "=" in lines[0]:
        for i, line in enumerate(lines):
            if not line.strip():
                body_start = i + 1
                break
            key, sep, value = line.partition("=")
            key = key.strip()
            if not sep:
                raise MapParseError("expected 'key = value' header line", line=i + 1)
            try:
                if key in _FLOAT_KEYS:
                    header[key] = float(value)
                elif key in _INT_KEYS:
                    header[key] = int(value)
                else:
                    raise MapParseError(f"unknown header key {key!r}", line=i + 1)
            except ValueError as exc:
                if isinstance(exc, MapParseError):
                    raise
                raise MapParseError(f"bad value for {key!r}: {value.strip()!r}", line=i + 1) from None
        else:
            raise MapParseError("header must be followed by a blank line and the map")
    body = lines[body_start:]
    while body and not body[-1]:
        body.pop()
    for i, line in enumerate(body):
        if not line:
            raise MapParseError("blank line inside map", line=body_start + i + 1)
    spec = validate_spec(GridSpec(tuple(body), **header), line_offset=body_start)
    return spec


def load_map(path) -> GridSpec:
    with open(path, encoding="utf-8") as fh:
        return parse_map(fh.read())


def case_study_map_text() -> str:
    return resources.files("stmdp").joinpath("data/paper.grid").read_text(encoding="utf-8")


def case_study_spec(windy: bool = False) -> GridSpec:
    """The bundled reconstruction of the 4 x 6 case-study grid."""
    spec = parse_map(case_study_map_text())
    if windy:
        spec = spec.with_wind(CASE_STUDY_WIND, CASE_STUDY_WIND)
    return spec


def make_indexing(spec: GridSpec) -> StateIndexing:
    cells = []
    for r in range(spec.rows - 1, -1, -1):
        for c in range(spec.cols):
            if spec.cells[r][c] != "#":
                cells.append((r, c))
    mapping = {cell: i for i, cell in enumerate(cells)}
    return StateIndexing(
        cell_to_state=mapping,
        state_to_cell=cells,
        absorbing_state=len(cells),
        start_state=mapping[spec.find("S")],
        target_state=mapping[spec.find("T")],
    )


def direction_distribution(intended: int, wind_north: float, wind_west: float) -> Dict[int, float]:
    """Realised-direction probabilities; wind replaces the intended move."""
    dist = {intended: 1.0 - wind_north - wind_west}
    dist[NORTH] = dist.get(NORTH, 0.0) + wind_north
    dist[WEST] = dist.get(WEST, 0.0) + wind_west
    return {d: p for d, p in dist.items() if p > 0.0}


def build_mdp(spec: GridSpec):
    """Build the MDP and state indexing for a validated grid."""
    index = make_indexing(spec)
    n = index.num_states
    absorbing = index.absorbing_state
    p = np.zeros((len(ACTIONS), n, n))
    costs = np.full((n, len(ACTIONS)), float(spec.step_cost))
    costs[index.target_state] = 0.0
    costs[absorbing] = 0.0
    for x, (r, c) in enumerate(index.state_to_cell):
        for a in range(len(ACTIONS)):
            if x == index.target_state:
                p[a, x, absorbing] = 1.0
                continue
            for d, prob in direction_distribution(a, spec.wind_north, spec.wind_west).items():
                dr, dc = _MOVES[d]
                dest = (r + dr, c + dc)
                y = index.cell_to_state[dest] if spec.is_free(*dest) else x
                p[a, x, y] += prob
    p[:, absorbing, absorbing] = 1.0
    return MdpModel(p, costs, ACTIONS), index


def display_index(indexing: StateIndexing, state: int) -> str:
    """1-based label used in figures and documents."""
    if not 0 <= state < indexing.num_states:
        raise IndexError(f"state {state} out of range [0, {indexing.num_states})")
    return str(state + 1)


def state_from_display(indexing: StateIndexing, label) -> int:
    try:
        state = int(label) - 1
    except (TypeError, ValueError):
        raise ValueError(f"not a state label: {label!r}") from None
    if not 0 <= state < indexing.num_states:
        raise IndexError(f"state label {label} out of range [1, {indexing.num_states}]")
    return state
