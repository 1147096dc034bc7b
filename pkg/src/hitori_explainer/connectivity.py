"""Grid-graph analysis and connectivity proofs by picture.

When a subgoal has no weak proof, the weak constraints plus the goal
negation are satisfiable; their backbone literals force a set of cells
shaded.  If the remaining cells split the must-be-unshaded cells across two
components, the picture itself is the proof.  Otherwise articulation points
whose removal would separate two must-be-unshaded cells are themselves
forced unshaded; adding those units can turn the goal refutable after all.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

from .cnf import Cnf, Lit
from .grid import CellRef, Grid, SHADED, UNSHADED, ShadingState
from .proofs import NonUnitUnsat, NoWeakProof, WeakEngine, WeakProof
from .sat import backbone


class PreconditionViolated(ValueError):
    pass


class NonUnitUnsatError(RuntimeError):
    """Weak constraints unsatisfiable but not by propagation; never seen on real puzzles."""

    def __init__(self, cell: CellRef) -> None:
        super().__init__(f"no unit-resolution refutation exists for {cell.name}")
        self.cell = cell


@dataclass(frozen=True)
class CellGraph:
    """Cells not currently forced shaded, with orthogonal adjacency."""

    rows: int
    cols: int
    vertices: frozenset[CellRef]

    def neighbors(self, cell: CellRef) -> list[CellRef]:
        out = []
        for di, dj in ((-1, 0), (0, -1), (0, 1), (1, 0)):
            n = CellRef(cell.row + di, cell.col + dj)
            if 0 <= n.row < self.rows and 0 <= n.col < self.cols and n in self.vertices:
                out.append(n)
        return out


def components(g: CellGraph) -> list[frozenset[CellRef]]:
    """Maximal edge-connected vertex sets, ordered by smallest row-major cell."""
    seen: set[CellRef] = set()
    comps: list[frozenset[CellRef]] = []
    for start in sorted(g.vertices):
        if start in seen:
            continue
        comp = {start}
        stack = [start]
        while stack:
            v = stack.pop()
            for w in g.neighbors(v):
                if w not in comp:
                    comp.add(w)
                    stack.append(w)
        seen |= comp
        comps.append(frozenset(comp))
    return comps


def articulation_points(g: CellGraph) -> set[CellRef]:
    """Vertices whose removal increases the component count (Hopcroft-Tarjan)."""
    disc: dict[CellRef, int] = {}
    low: dict[CellRef, int] = {}
    aps: set[CellRef] = set()
    counter = 0
    for root in sorted(g.vertices):
        if root in disc:
            continue
        disc[root] = low[root] = counter
        counter += 1
        root_children = 0
        stack: list[tuple[CellRef, CellRef | None, list[CellRef], int]] = [
            (root, None, g.neighbors(root), 0)]
        while stack:
            v, parent, nbrs, i = stack.pop()
            descended = False
            while i < len(nbrs):
                w = nbrs[i]
                i += 1
                if w not in disc:
                    stack.append((v, parent, nbrs, i))
                    disc[w] = low[w] = counter
                    counter += 1
                    if v == root:
                        root_children += 1
                    stack.append((w, v, g.neighbors(w), 0))
                    descended = True
                    break
                if w != parent and disc[w] < low[v]:
                    low[v] = disc[w]
            if not descended and parent is not None:
                if low[v] < low[parent]:
                    low[parent] = low[v]
                if parent != root and low[v] >= disc[parent]:
                    aps.add(parent)
        if root_children > 1:
            aps.add(root)
    return aps


@dataclass(frozen=True)
class Disconnected:
    pass


@dataclass(frozen=True)
class ArticulationUnsat:
    points: tuple[CellRef, ...]
    refutation: WeakProof


@dataclass(frozen=True)
class NotProvableWeakly:
    """Connectivity analysis cannot settle the subgoal; a strong proof would be needed."""

    cell: CellRef


@dataclass
class PictureProof:
    """A connectivity argument rendered as a classified grid."""

    rows: int
    cols: int
    assumed: tuple[CellRef, bool]  # (cell, assumed shaded?)
    forced_shaded: frozenset[CellRef]
    must_unshaded: frozenset[CellRef]
    previously_shaded: frozenset[CellRef]
    components: tuple[frozenset[CellRef], ...]
    verdict: Union[Disconnected, ArticulationUnsat]
    ascii: str = field(default="")

    def __post_init__(self) -> None:
        if not self.ascii:
            self.ascii = render_picture(self)

    def classification(self) -> list[list[str]]:
        """Per-cell tag: 'X' previously shaded, 'x' newly forced shaded,
        '.' main component, '-' other components."""
        dot_component: frozenset[CellRef] = frozenset()
        anchored = sorted(self.must_unshaded)
        if anchored:
            for comp in self.components:
                if anchored[0] in comp:
                    dot_component = comp
                    break
        elif self.components:
            dot_component = self.components[0]
        tags = []
        for i in range(self.rows):
            row = []
            for j in range(self.cols):
                cell = CellRef(i, j)
                if cell in self.previously_shaded:
                    row.append("X")
                elif cell in self.forced_shaded:
                    row.append("x")
                elif cell in dot_component:
                    row.append(".")
                else:
                    row.append("-")
            tags.append(row)
        return tags


def render_picture(p: PictureProof) -> str:
    return "\n".join(" ".join(row) for row in p.classification())


def _separates_must_cells(g: CellGraph, v: CellRef, must: frozenset[CellRef]) -> bool:
    """Does removing v split two must-be-unshaded cells apart?"""
    remaining = g.vertices - {v}
    sub = CellGraph(g.rows, g.cols, remaining)
    targets = {m for m in must if m != v}
    if len(targets) < 2:
        return False
    hit_components = 0
    seen: set[CellRef] = set()
    for t in sorted(targets):
        if t in seen:
            continue
        comp = {t}
        stack = [t]
        while stack:
            x = stack.pop()
            for w in sub.neighbors(x):
                if w not in comp:
                    comp.add(w)
                    stack.append(w)
        seen |= comp
        hit_components += 1
        if hit_components >= 2:
            return True
    return False


def picture_proof(grid: Grid, weak: Cnf, established: list[Lit], subgoal: Lit,
                  engine: WeakEngine | None = None,
                  precomputed: NoWeakProof | None = None,
                  ) -> Union[PictureProof, NotProvableWeakly]:
    """Build a connectivity proof for a subgoal that has no weak proof.

    Runs the articulation escalation as a fixpoint loop: assert the useful
    articulation points unshaded, re-derive, and recompute the backbone,
    stopping as soon as the picture disconnects or a refutation appears.
    """
    engine = engine or WeakEngine(weak)
    goal_cell = weak.cell_of_lit(subgoal)
    assumption = -subgoal

    if precomputed is None:
        engine.set_established(established)
        outcome = engine.derive(subgoal)
        if isinstance(outcome, WeakProof):
            raise PreconditionViolated(f"{goal_cell.name} has a weak proof")
        if isinstance(outcome, NonUnitUnsat):
            raise NonUnitUnsatError(goal_cell)

    est_shaded = frozenset(weak.cell_of_lit(l) for l in established if l < 0)
    est_unshaded = frozenset(weak.cell_of_lit(l) for l in established if l > 0)
    cell_vars = weak.cell_vars()
    known = set(established)
    art_units: list[Lit] = []
    art_cells: list[CellRef] = []

    try:
        while True:
            bb = backbone(weak, established + art_units + [assumption],
                          cell_vars, solver=engine.solver)
            forced_shaded = frozenset(weak.cell_of_lit(l) for l in bb if l < 0) | est_shaded
            must_unshaded = frozenset(weak.cell_of_lit(l) for l in bb if l > 0) | est_unshaded
            graph = CellGraph(grid.rows, grid.cols,
                              frozenset(c for c in grid.cells() if c not in forced_shaded))
            comps = tuple(components(graph))
            with_must = [c for c in comps if c & must_unshaded]
            if len(with_must) >= 2:
                return PictureProof(grid.rows, grid.cols, (goal_cell, subgoal > 0),
                                    forced_shaded, must_unshaded, est_shaded, comps,
                                    Disconnected())

            arts = sorted(a for a in articulation_points(graph)
                          if _separates_must_cells(graph, a, must_unshaded))
            new_units = [weak.cell_lit(a) for a in arts
                         if weak.cell_lit(a) not in known]
            if not new_units:
                return NotProvableWeakly(goal_cell)
            known.update(new_units)
            art_units.extend(new_units)
            art_cells.extend(weak.cell_of_lit(l) for l in new_units)

            engine.set_established(established + art_units)
            outcome = engine.derive(subgoal)
            if isinstance(outcome, WeakProof):
                return PictureProof(grid.rows, grid.cols, (goal_cell, subgoal > 0),
                                    forced_shaded, must_unshaded, est_shaded, comps,
                                    ArticulationUnsat(tuple(art_cells), outcome))
            if isinstance(outcome, NonUnitUnsat):
                raise NonUnitUnsatError(goal_cell)
    finally:
        engine.set_established(established)


def state_from_picture(grid: Grid, p: PictureProof) -> ShadingState:
    """The hypothetical board the picture depicts (forced cells shaded)."""
    state = ShadingState.all_unknown(grid)
    for cell in grid.cells():
        if cell in p.forced_shaded:
            state.set(cell, SHADED)
        elif cell in p.must_unshaded:
            state.set(cell, UNSHADED)
    return state
