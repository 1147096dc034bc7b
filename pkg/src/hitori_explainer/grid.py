"""Hitori grids and shading states.

A Hitori puzzle is an m x n grid of positive integer symbols.  The solver
shades some cells so that no symbol repeats unshaded in a row or column
(uniqueness), no two shaded cells share an edge (separation), and the
unshaded cells form one edge-connected region (connection).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

MAX_SIDE = 99  # two-digit row/column indices keep variable names unambiguous

SHADED = "shaded"
UNSHADED = "unshaded"
UNKNOWN = "unknown"

ORTHO_DIRS = ((-1, 0), (0, -1), (0, 1), (1, 0))

_CELL_NAME_RE = re.compile(r"^r(\d+)c(\d+)$")


class PuzzleFormatError(ValueError):
    """Bad puzzle text."""


class RaggedRows(PuzzleFormatError):
    pass


class BadToken(PuzzleFormatError):
    pass


class TooLarge(PuzzleFormatError):
    pass


class DimensionMismatch(ValueError):
    pass


class CellRef(NamedTuple):
    """0-based cell coordinates; row 0 is the top row."""

    row: int
    col: int

    @property
    def name(self) -> str:
        return f"r{self.row + 1}c{self.col + 1}"

    @classmethod
    def from_name(cls, name: str) -> "CellRef":
        m = _CELL_NAME_RE.match(name)
        if not m:
            raise ValueError(f"bad cell name {name!r}")
        return cls(int(m.group(1)) - 1, int(m.group(2)) - 1)

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Grid:
    """Immutable puzzle grid of positive integer symbols."""

    rows: int
    cols: int
    symbols: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        if not (1 <= self.rows <= MAX_SIDE and 1 <= self.cols <= MAX_SIDE):
            raise TooLarge(f"grid must be between 1x1 and {MAX_SIDE}x{MAX_SIDE}")
        if len(self.symbols) != self.rows or any(len(r) != self.cols for r in self.symbols):
            raise DimensionMismatch("symbol matrix does not match declared dimensions")
        if any(s < 1 for row in self.symbols for s in row):
            raise BadToken("symbols must be positive integers")

    def symbol(self, cell: CellRef) -> int:
        return self.symbols[cell.row][cell.col]

    def in_bounds(self, row: int, col: int) -> bool:
        return 0 <= row < self.rows and 0 <= col < self.cols

    def cells(self) -> Iterator[CellRef]:
        for i in range(self.rows):
            for j in range(self.cols):
                yield CellRef(i, j)

    def neighbors(self, cell: CellRef) -> list[CellRef]:
        """Orthogonal neighbors in row-major order."""
        out = []
        for di, dj in ORTHO_DIRS:
            i, j = cell.row + di, cell.col + dj
            if self.in_bounds(i, j):
                out.append(CellRef(i, j))
        return out

    def duplicate_pairs(self) -> list[tuple[CellRef, CellRef]]:
        """Same-symbol cell pairs sharing a row or column.

        Rows first, then columns; within each line, pairs ordered by the
        row-major order of their first cell.
        """
        pairs = []
        for i in range(self.rows):
            for j in range(self.cols):
                for k in range(j + 1, self.cols):
                    if self.symbols[i][j] == self.symbols[i][k]:
                        pairs.append((CellRef(i, j), CellRef(i, k)))
        for j in range(self.cols):
            for i in range(self.rows):
                for k in range(i + 1, self.rows):
                    if self.symbols[i][j] == self.symbols[k][j]:
                        pairs.append((CellRef(i, j), CellRef(k, j)))
        return pairs

    def raw_text(self) -> str:
        return "\n".join(" ".join(str(s) for s in row) for row in self.symbols)


def parse_puzzle(text: str) -> Grid:
    """Parse puzzle text: rows of whitespace-separated positive integers.

    Blank lines and lines starting with "#" are ignored.
    """
    rows: list[tuple[int, ...]] = []
    for line in text.splitlines():
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        row = []
        for tok in stripped.split():
            if not tok.isdigit() or int(tok) < 1:
                raise BadToken(f"bad symbol token {tok!r}")
            row.append(int(tok))
        rows.append(tuple(row))
    if not rows:
        raise PuzzleFormatError("puzzle text contains no rows")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise RaggedRows("rows have unequal lengths")
    if len(rows) > MAX_SIDE or width > MAX_SIDE:
        raise TooLarge(f"grid exceeds {MAX_SIDE}x{MAX_SIDE}")
    return Grid(len(rows), width, tuple(rows))


@dataclass
class ShadingState:
    """Per-cell shading status; mutable while a plan is being replayed."""

    rows: int
    cols: int
    status: list[list[str]] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.status:
            self.status = [[UNKNOWN] * self.cols for _ in range(self.rows)]

    @classmethod
    def all_unknown(cls, grid: Grid) -> "ShadingState":
        return cls(grid.rows, grid.cols)

    @classmethod
    def from_shaded_set(cls, grid: Grid, shaded: set[CellRef]) -> "ShadingState":
        state = cls(grid.rows, grid.cols)
        for cell in grid.cells():
            state.set(cell, SHADED if cell in shaded else UNSHADED)
        return state

    def get(self, cell: CellRef) -> str:
        return self.status[cell.row][cell.col]

    def set(self, cell: CellRef, value: str) -> None:
        assert value in (SHADED, UNSHADED, UNKNOWN)
        self.status[cell.row][cell.col] = value

    def copy(self) -> "ShadingState":
        return ShadingState(self.rows, self.cols, [row[:] for row in self.status])

    def is_complete(self) -> bool:
        return all(v != UNKNOWN for row in self.status for v in row)

    def shaded_cells(self) -> list[CellRef]:
        return [CellRef(i, j) for i in range(self.rows) for j in range(self.cols)
                if self.status[i][j] == SHADED]

    def unshaded_cells(self) -> list[CellRef]:
        return [CellRef(i, j) for i in range(self.rows) for j in range(self.cols)
                if self.status[i][j] == UNSHADED]

    def __eq__(self, other: object) -> bool:
        return isinstance(other, ShadingState) and self.status == other.status


@dataclass(frozen=True)
class Verdict:
    ok: bool
    rule: str | None = None  # "uniqueness" | "separation" | "connection"
    witness: tuple[CellRef, ...] = ()

    def __bool__(self) -> bool:
        return self.ok


VALID = Verdict(True)


def check_solution(grid: Grid, state: ShadingState) -> Verdict:
    """Check a complete shading against the three Hitori rules.

    Scans rule 1, then 2, then 3, row-major, and reports the first violation
    with witness cells.
    """
    if (grid.rows, grid.cols) != (state.rows, state.cols):
        raise DimensionMismatch("state dimensions do not match grid")
    if not state.is_complete():
        raise ValueError("check_solution requires a complete state")

    for a, b in grid.duplicate_pairs():
        if state.get(a) == UNSHADED and state.get(b) == UNSHADED:
            return Verdict(False, "uniqueness", (a, b))

    for cell in grid.cells():
        if state.get(cell) != SHADED:
            continue
        for other in grid.neighbors(cell):
            if other > cell and state.get(other) == SHADED:
                return Verdict(False, "separation", (cell, other))

    unshaded = state.unshaded_cells()
    if not unshaded:
        # The unshaded region must be nonempty; only a fully shaded 1x1 grid
        # can reach this branch under rules 1 and 2.
        return Verdict(False, "connection", ())
    region = set(unshaded)
    seen = {unshaded[0]}
    stack = [unshaded[0]]
    while stack:
        cell = stack.pop()
        for other in grid.neighbors(cell):
            if other in region and other not in seen:
                seen.add(other)
                stack.append(other)
    if len(seen) != len(region):
        stranded = min(c for c in region if c not in seen)
        return Verdict(False, "connection", (unshaded[0], stranded))
    return VALID


def render_state(grid: Grid, state: ShadingState) -> str:
    """One text row per grid row: "#" shaded, the symbol if unshaded, "?" unknown."""
    if (grid.rows, grid.cols) != (state.rows, state.cols):
        raise DimensionMismatch("state dimensions do not match grid")
    rows = []
    for i in range(grid.rows):
        toks = []
        for j in range(grid.cols):
            s = state.status[i][j]
            if s == SHADED:
                toks.append("#")
            elif s == UNSHADED:
                toks.append(str(grid.symbols[i][j]))
            else:
                toks.append("?")
        rows.append(" ".join(toks))
    return "\n".join(rows)
