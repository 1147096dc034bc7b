"""CNF encodings of a Hitori grid.

Variables are positive integers; literals are signed integers (DIMACS
convention).  Each variable carries a semantic tag:

  c r c   cell is clear (unshaded)
  h r c b / v r c b   horizontal / vertical parent-link code bits
  p r c   turn-parity bit used to forbid pointer cycles
  root    selects which of the two root candidate cells is the tree root

The weak encoding uses only the cell-clear variables: uniqueness and
separation pair clauses plus two redundant lemma families (sandwich units
and unshaded-neighbor clauses) that keep explanations short.  The strong
encoding adds parent links, turn parity, and root selection, which force the
unshaded cells to carry a spanning tree and hence to be connected.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .grid import CellRef, Grid, SHADED, ShadingState, UNSHADED

Lit = int

# Horizontal link code (h1, h0): FF none, FT right, TF left, TT forbidden.
# Vertical link code (v1, v0):   FF none, FT up,    TF down, TT forbidden.
_H_CODES = {"right": (False, True), "left": (True, False)}
_V_CODES = {"up": (False, True), "down": (True, False)}
_DIR_DELTA = {"right": (0, 1), "left": (0, -1), "up": (-1, 0), "down": (1, 0)}
_DIR_ORDER = ("right", "left", "up", "down")
_REVERSE = {"right": "left", "left": "right", "up": "down", "down": "up"}

_VAR_NAME_RE = re.compile(r"^([chvp])(\d\d)_(\d\d)(?:_([01]))?$|^root$")


class BadName(ValueError):
    pass


class UnknownReason(ValueError):
    pass


class GridTooSmall(ValueError):
    pass


@dataclass(frozen=True)
class VarTag:
    """Semantic identity of one Boolean variable."""

    kind: str  # "c" | "h" | "v" | "p" | "root"
    row: int = -1
    col: int = -1
    bit: int = -1  # for h/v: 1 = high code bit, 0 = low code bit

    @property
    def cell(self) -> CellRef:
        return CellRef(self.row, self.col)


def var_name(tag: VarTag) -> str:
    if tag.kind == "root":
        return "root"
    if tag.kind == "x":  # untagged variable from DIMACS ingestion
        return f"x{tag.col}"
    base = f"{tag.kind}{tag.row + 1:02d}_{tag.col + 1:02d}"
    if tag.kind in ("h", "v"):
        return f"{base}_{tag.bit}"
    return base


def parse_var_name(text: str) -> VarTag:
    m = _VAR_NAME_RE.match(text)
    if not m:
        raise BadName(f"bad variable name {text!r}")
    if text == "root":
        return VarTag("root")
    kind, row, col, bit = m.group(1), int(m.group(2)), int(m.group(3)), m.group(4)
    if row < 1 or col < 1:
        raise BadName(f"bad variable name {text!r}")
    if kind in ("h", "v"):
        if bit is None:
            raise BadName(f"link variable {text!r} needs a code bit")
        return VarTag(kind, row - 1, col - 1, int(bit))
    if bit is not None:
        raise BadName(f"unexpected code bit in {text!r}")
    return VarTag(kind, row - 1, col - 1)


@dataclass(frozen=True)
class Reason:
    """Why a clause was emitted; drives the human-readable reason text."""

    kind: str  # uniqueness | separation | sandwich | unshaded_neighbor |
    #            parent_link | parity | root | blocking | goal_assumption | derived
    cells: tuple[CellRef, ...] = ()
    detail: str = ""


DERIVED = Reason("derived")


@dataclass(frozen=True)
class Clause:
    lits: tuple[Lit, ...]
    reason: Reason = DERIVED

    def __post_init__(self) -> None:
        seen = set(self.lits)
        if len(seen) != len(self.lits):
            object.__setattr__(self, "lits", tuple(dict.fromkeys(self.lits)))
            seen = set(self.lits)
        if any(-l in seen for l in seen):
            raise ValueError(f"tautological clause {self.lits}")


class Cnf:
    """A clause list plus the variable registry.  Immutable once built."""

    def __init__(self, strength: str) -> None:
        assert strength in ("weak", "strong")
        self.strength = strength
        self.clauses: list[Clause] = []
        self._tags: list[VarTag] = [VarTag("unused")]  # 1-based ids
        self._by_tag: dict[VarTag, int] = {}
        self._by_lits: dict[frozenset[Lit], int] = {}

    # -- registry -----------------------------------------------------------

    def add_var(self, tag: VarTag) -> int:
        if tag in self._by_tag:
            raise ValueError(f"duplicate variable tag {tag}")
        self._tags.append(tag)
        vid = len(self._tags) - 1
        self._by_tag[tag] = vid
        return vid

    @property
    def num_vars(self) -> int:
        return len(self._tags) - 1

    def tag_of(self, var: int) -> VarTag:
        return self._tags[var]

    def var_of(self, tag: VarTag) -> int:
        return self._by_tag[tag]

    def has_tag(self, tag: VarTag) -> bool:
        return tag in self._by_tag

    def cell_var(self, row: int, col: int) -> int:
        return self._by_tag[VarTag("c", row, col)]

    def cell_lit(self, cell: CellRef, unshaded: bool = True) -> Lit:
        v = self.cell_var(cell.row, cell.col)
        return v if unshaded else -v

    def cell_of_lit(self, lit: Lit) -> CellRef:
        tag = self.tag_of(abs(lit))
        assert tag.kind == "c"
        return tag.cell

    def cell_vars(self) -> list[int]:
        return [v for v in range(1, self.num_vars + 1) if self._tags[v].kind == "c"]

    def lit_name(self, lit: Lit) -> str:
        name = var_name(self._tags[abs(lit)])
        return name if lit > 0 else f"(not {name})"

    def parse_lit(self, text: str) -> Lit:
        neg = False
        if text.startswith("(not ") and text.endswith(")"):
            neg, text = True, text[5:-1].strip()
        tag = parse_var_name(text)
        v = self._by_tag.get(tag)
        if v is None:
            raise BadName(f"variable {text!r} is not registered")
        return -v if neg else v

    # -- clauses ------------------------------------------------------------

    def add_clause(self, lits: tuple[Lit, ...], reason: Reason) -> None:
        clause = Clause(lits, reason)
        key = frozenset(clause.lits)
        if key in self._by_lits:
            return  # deduplicated
        self._by_lits[key] = len(self.clauses)
        self.clauses.append(clause)

    def clause_index(self, lits: frozenset[Lit]) -> int | None:
        return self._by_lits.get(lits)

    def clause_text(self, clause: Clause) -> str:
        if len(clause.lits) == 1:
            return self.lit_name(clause.lits[0])
        return "(or " + " ".join(self.lit_name(l) for l in clause.lits) + ")"

    def to_dimacs(self) -> str:
        """Debugging export; comment lines carry tags and reasons."""
        lines = [f"p cnf {self.num_vars} {len(self.clauses)}"]
        for v in range(1, self.num_vars + 1):
            lines.append(f"c var {v} = {var_name(self._tags[v])}")
        for clause in self.clauses:
            lines.append(f"c reason {clause.reason.kind}"
                         + (f" {' '.join(c.name for c in clause.reason.cells)}"
                            if clause.reason.cells else ""))
            lines.append(" ".join(str(l) for l in clause.lits) + " 0")
        return "\n".join(lines) + "\n"


def clause_reason_text(clause: Clause, grid: Grid) -> str:
    """One-line English sentence naming the cells and the rule."""
    r = clause.reason
    if r.kind == "uniqueness":
        a, b = r.cells
        return f"{a.name} and {b.name} cannot both be unshaded because they have the same symbol"
    if r.kind == "separation":
        a, b = r.cells
        return f"{a.name} and {b.name} cannot both be shaded because they share an edge"
    if r.kind == "sandwich":
        (cell,) = r.cells
        return f"{cell.name} has identical neighbors in its {r.detail}"
    if r.kind == "unshaded_neighbor":
        (cell,) = r.cells
        return f"{cell.name} must have an unshaded neighbor"
    if r.kind == "root":
        return "one of the first two cells must be unshaded" if not r.detail else r.detail
    if r.kind == "blocking":
        return "a second solution must differ somewhere from the first"
    if r.kind == "goal_assumption":
        (cell,) = r.cells
        return f"assume {cell.name} is {r.detail}"
    raise UnknownReason(f"no reason text for {r.kind} clause")


def _register_cell_vars(cnf: Cnf, grid: Grid) -> None:
    for cell in grid.cells():
        cnf.add_var(VarTag("c", cell.row, cell.col))


def _emit_weak_clauses(cnf: Cnf, grid: Grid) -> None:
    for a, b in grid.duplicate_pairs():
        cnf.add_clause((-cnf.cell_lit(a), -cnf.cell_lit(b)), Reason("uniqueness", (a, b)))

    for cell in grid.cells():
        for other in (CellRef(cell.row, cell.col + 1), CellRef(cell.row + 1, cell.col)):
            if grid.in_bounds(*other):
                cnf.add_clause((cnf.cell_lit(cell), cnf.cell_lit(other)),
                               Reason("separation", (cell, other)))

    for cell in grid.cells():
        i, j = cell
        if 0 < j < grid.cols - 1 and grid.symbols[i][j - 1] == grid.symbols[i][j + 1]:
            cnf.add_clause((cnf.cell_lit(cell),), Reason("sandwich", (cell,), "row"))
        elif 0 < i < grid.rows - 1 and grid.symbols[i - 1][j] == grid.symbols[i + 1][j]:
            cnf.add_clause((cnf.cell_lit(cell),), Reason("sandwich", (cell,), "column"))

    if grid.rows * grid.cols >= 4:
        for cell in grid.cells():
            lits = tuple(cnf.cell_lit(n) for n in grid.neighbors(cell))
            cnf.add_clause(lits, Reason("unshaded_neighbor", (cell,)))

    if grid.rows * grid.cols == 1:
        # Degenerate grid: the connection rule still demands a nonempty
        # unshaded region, so the single cell is unshaded.
        cnf.add_clause((cnf.cell_lit(CellRef(0, 0)),),
                       Reason("root", (CellRef(0, 0),), "the only cell must be unshaded"))


def encode_weak(grid: Grid) -> Cnf:
    """Uniqueness, separation, sandwich, and unshaded-neighbor clauses."""
    cnf = Cnf("weak")
    _register_cell_vars(cnf, grid)
    _emit_weak_clauses(cnf, grid)
    return cnf


def _dir_lits(cnf: Cnf, cell: CellRef, direction: str) -> tuple[Lit, Lit]:
    """The two literals that hold exactly when `cell`'s link points `direction`."""
    if direction in _H_CODES:
        kind, (b1, b0) = "h", _H_CODES[direction]
    else:
        kind, (b1, b0) = "v", _V_CODES[direction]
    v1 = cnf.var_of(VarTag(kind, cell.row, cell.col, 1))
    v0 = cnf.var_of(VarTag(kind, cell.row, cell.col, 0))
    return (v1 if b1 else -v1, v0 if b0 else -v0)


def _not_dir(cnf: Cnf, cell: CellRef, direction: str) -> tuple[Lit, Lit]:
    l1, l0 = _dir_lits(cnf, cell, direction)
    return (-l1, -l0)


def root_candidates(grid: Grid) -> tuple[CellRef, CellRef]:
    """The two adjacent cells one of which hosts the spanning-tree root.

    First two cells of the first row; for single-column grids the first two
    cells of the first column (the same adjacency argument applies).
    """
    if grid.cols >= 2:
        return CellRef(0, 0), CellRef(0, 1)
    if grid.rows >= 2:
        return CellRef(0, 0), CellRef(1, 0)
    raise GridTooSmall("no root pair in a 1x1 grid")


def encode_strong(grid: Grid) -> Cnf:
    """Weak clauses plus the spanning-tree connectivity machinery."""
    if grid.rows * grid.cols == 1:
        return encode_weak(grid)

    cnf = Cnf("strong")
    _register_cell_vars(cnf, grid)
    for cell in grid.cells():
        cnf.add_var(VarTag("h", cell.row, cell.col, 1))
        cnf.add_var(VarTag("h", cell.row, cell.col, 0))
        cnf.add_var(VarTag("v", cell.row, cell.col, 1))
        cnf.add_var(VarTag("v", cell.row, cell.col, 0))
    for cell in grid.cells():
        cnf.add_var(VarTag("p", cell.row, cell.col))
    root = cnf.add_var(VarTag("root"))

    _emit_weak_clauses(cnf, grid)

    link = Reason("parent_link")
    cand_a, cand_b = root_candidates(grid)

    def hv(cell: CellRef, kind: str, bit: int) -> int:
        return cnf.var_of(VarTag(kind, cell.row, cell.col, bit))

    # Forbidden code (T, T) for each link pair; shaded cells stay unconstrained.
    for cell in grid.cells():
        nc = -cnf.cell_lit(cell)
        cnf.add_clause((nc, -hv(cell, "h", 1), -hv(cell, "h", 0)), link)
        cnf.add_clause((nc, -hv(cell, "v", 1), -hv(cell, "v", 0)), link)

    # Link target validity: no pointing off-grid, and the target must be clear.
    for cell in grid.cells():
        nc = -cnf.cell_lit(cell)
        for d in _DIR_ORDER:
            di, dj = _DIR_DELTA[d]
            ti, tj = cell.row + di, cell.col + dj
            if not grid.in_bounds(ti, tj):
                cnf.add_clause((nc, *_not_dir(cnf, cell, d)), link)
            else:
                cnf.add_clause((nc, *_not_dir(cnf, cell, d), cnf.cell_lit(CellRef(ti, tj))), link)

    # At most one outgoing edge: an h code bit and a v code bit cannot both be set.
    for cell in grid.cells():
        nc = -cnf.cell_lit(cell)
        for hb in (1, 0):
            for vb in (1, 0):
                cnf.add_clause((nc, -hv(cell, "h", hb), -hv(cell, "v", vb)), link)

    # At least one outgoing edge for each unshaded non-root cell.
    for cell in grid.cells():
        lits = [-cnf.cell_lit(cell)]
        if cell == cand_a:
            lits.append(-root)  # root var false means cand_a is the root
        elif cell == cand_b:
            lits.append(root)
        lits.extend(hv(cell, k, b) for k in ("h", "v") for b in (1, 0))
        cnf.add_clause(tuple(lits), link)

    # Root selection: the chosen root is unshaded and has no outgoing link.
    cnf.add_clause((root, cnf.cell_lit(cand_a)), Reason("root", (cand_a,)))
    cnf.add_clause((-root, cnf.cell_lit(cand_b)), Reason("root", (cand_b,)))
    for k in ("h", "v"):
        for b in (1, 0):
            cnf.add_clause((root, -hv(cand_a, k, b)), Reason("root", (cand_a,)))
            cnf.add_clause((-root, -hv(cand_b, k, b)), Reason("root", (cand_b,)))

    # No two cells may point at each other (short loops escape the parity bit).
    for cell in grid.cells():
        right = CellRef(cell.row, cell.col + 1)
        if grid.in_bounds(*right):
            cnf.add_clause((-cnf.cell_lit(cell), -cnf.cell_lit(right),
                            *_not_dir(cnf, cell, "right"), *_not_dir(cnf, right, "left")), link)
        down = CellRef(cell.row + 1, cell.col)
        if grid.in_bounds(*down):
            cnf.add_clause((-cnf.cell_lit(cell), -cnf.cell_lit(down),
                            *_not_dir(cnf, cell, "down"), *_not_dir(cnf, down, "up")), link)

    # Turn parity: walking pred -> cell -> out, the parity bits of pred and
    # cell differ on the two notable turns (up-then-right, right-then-up) and
    # agree on the other ten incoming/outgoing combinations.
    parity = Reason("parity")
    for cell in grid.cells():
        p_cell = cnf.var_of(VarTag("p", cell.row, cell.col))
        for d_in in _DIR_ORDER:
            di, dj = _DIR_DELTA[d_in]
            pred = CellRef(cell.row - di, cell.col - dj)  # pred points d_in into cell
            if not grid.in_bounds(*pred):
                continue
            p_pred = cnf.var_of(VarTag("p", pred.row, pred.col))
            for d_out in _DIR_ORDER:
                if d_out == _REVERSE[d_in]:
                    continue  # mutual pointing is forbidden separately
                ti, tj = cell.row + _DIR_DELTA[d_out][0], cell.col + _DIR_DELTA[d_out][1]
                if not grid.in_bounds(ti, tj):
                    continue
                base = (-cnf.cell_lit(pred), -cnf.cell_lit(cell),
                        *_not_dir(cnf, pred, d_in), *_not_dir(cnf, cell, d_out))
                notable = (d_in, d_out) in (("up", "right"), ("right", "up"))
                if notable:
                    cnf.add_clause(base + (p_pred, p_cell), parity)
                    cnf.add_clause(base + (-p_pred, -p_cell), parity)
                else:
                    cnf.add_clause(base + (p_pred, -p_cell), parity)
                    cnf.add_clause(base + (-p_pred, p_cell), parity)

    return cnf


def blocking_clause(cnf: Cnf, grid: Grid, solution: ShadingState) -> Clause:
    """Negation of a solution's cell values: any other model must differ."""
    if not solution.is_complete():
        raise ValueError("blocking clause needs a complete solution")
    lits = tuple(-cnf.cell_lit(cell) if solution.get(cell) == UNSHADED else cnf.cell_lit(cell)
                 for cell in grid.cells())
    return Clause(lits, Reason("blocking"))


def state_from_model(cnf: Cnf, grid: Grid, model: list[bool]) -> ShadingState:
    """Project a model (1-based truth list) onto the cell-clear variables."""
    state = ShadingState.all_unknown(grid)
    for cell in grid.cells():
        v = cnf.cell_var(cell.row, cell.col)
        state.set(cell, UNSHADED if model[v] else SHADED)
    return state
