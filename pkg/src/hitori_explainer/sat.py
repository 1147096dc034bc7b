"""SAT engine: deterministic unit propagation and a small CDCL solver.

The propagator is the explanation workhorse: it visits clauses in CNF order
with a FIFO queue, records an antecedent for every forced literal, and
supports trail snapshots so a staging round can share the propagation prefix
of its established facts across many subgoal probes.

The CDCL solver decides the lowest-index unassigned variable, false first,
so runs are reproducible.  Assumptions are replayed as leading decisions per
call; the solver is reusable across calls over the same immutable CNF.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from random import Random

from .cnf import Cnf, Lit

ASSUMED = -1  # antecedent marker for assumption literals


class ContradictoryAssumptions(ValueError):
    pass


class NotSatisfiable(ValueError):
    pass


@dataclass
class PropagationTrace:
    """Forced literals with antecedent clause indices, in derivation order."""

    entries: list[tuple[Lit, int]] = field(default_factory=list)
    conflict: int | None = None  # clause index of the first conflict

    @property
    def literals(self) -> list[Lit]:
        return [lit for lit, _ in self.entries]


class UnitPropagator:
    """Occurrence-list unit propagation with trail undo over a fixed CNF."""

    def __init__(self, cnf: Cnf) -> None:
        self.cnf = cnf
        self.clauses: list[tuple[Lit, ...]] = [c.lits for c in cnf.clauses]
        n = cnf.num_vars
        self.value: list[int] = [0] * (n + 1)  # 0 unassigned, 1 true, -1 false
        self.trail: list[Lit] = []
        self.pos: list[int] = [-1] * (n + 1)  # trail index per variable
        self.antecedent: list[int] = [0] * (n + 1)  # clause index or ASSUMED
        self.qhead = 0
        self.occ: dict[Lit, list[int]] = {}
        for ci, lits in enumerate(self.clauses):
            for l in lits:
                self.occ.setdefault(l, []).append(ci)
        # Source unit clauses fire before anything else, in CNF order.
        self.base_conflict: int | None = None
        for ci, lits in enumerate(self.clauses):
            if len(lits) == 1 and not self._assign(lits[0], ci):
                self.base_conflict = ci
                break
        if self.base_conflict is None:
            self.base_conflict = self._propagate()
        self.base_mark = len(self.trail)

    def lit_value(self, lit: Lit) -> int:
        v = self.value[abs(lit)]
        return v if lit > 0 else -v

    def position(self, lit: Lit) -> int:
        return self.pos[abs(lit)]

    def antecedent_of(self, lit: Lit) -> int:
        return self.antecedent[abs(lit)]

    def _assign(self, lit: Lit, antecedent: int) -> bool:
        var = abs(lit)
        cur = self.value[var]
        want = 1 if lit > 0 else -1
        if cur != 0:
            return cur == want
        self.value[var] = want
        self.pos[var] = len(self.trail)
        self.antecedent[var] = antecedent
        self.trail.append(lit)
        return True

    def _propagate(self) -> int | None:
        """FIFO propagation to fixpoint; returns the first conflict clause index."""
        while self.qhead < len(self.trail):
            lit = self.trail[self.qhead]
            self.qhead += 1
            for ci in self.occ.get(-lit, ()):
                lits = self.clauses[ci]
                unassigned = 0
                last = 0
                satisfied = False
                for l in lits:
                    v = self.value[abs(l)]
                    if v != 0 and (v == 1) == (l > 0):
                        satisfied = True
                        break
                    if v == 0:
                        unassigned += 1
                        last = l
                if satisfied:
                    continue
                if unassigned == 0:
                    return ci
                if unassigned == 1:
                    self._assign(last, ci)
        return None

    def mark(self) -> int:
        return len(self.trail)

    def undo_to(self, mark: int) -> None:
        while len(self.trail) > mark:
            lit = self.trail.pop()
            var = abs(lit)
            self.value[var] = 0
            self.pos[var] = -1
        self.qhead = min(self.qhead, mark)

    def assume(self, lits: list[Lit]) -> int | None:
        """Assign assumptions in order, then propagate; returns conflict index.

        An assumption clashing with an already-forced literal reports that
        literal's antecedent clause as the conflict.
        """
        for lit in lits:
            if not self._assign(lit, ASSUMED):
                other = self.antecedent[abs(lit)]
                if other == ASSUMED:
                    raise ContradictoryAssumptions(
                        f"assumption {lit} contradicts a prior assumption")
                return other
        return self._propagate()


def propagate(cnf: Cnf, assumptions: list[Lit]) -> PropagationTrace:
    """Exhaustive unit propagation only; no decisions, no learning."""
    _check_assumptions(cnf, assumptions)
    prop = UnitPropagator(cnf)
    if prop.base_conflict is not None:
        conflict: int | None = prop.base_conflict
    else:
        conflict = prop.assume(list(assumptions))
    trace = PropagationTrace()
    for lit in prop.trail:
        ante = prop.antecedent[abs(lit)]
        if ante != ASSUMED:
            trace.entries.append((lit, ante))
    trace.conflict = conflict
    return trace


def _check_assumptions(cnf: Cnf, assumptions: list[Lit]) -> None:
    seen: set[Lit] = set()
    for lit in assumptions:
        if lit == 0 or abs(lit) > cnf.num_vars:
            raise ValueError(f"assumption {lit} references an unregistered variable")
        if -lit in seen:
            raise ContradictoryAssumptions(f"assumptions contain both {lit} and {-lit}")
        seen.add(lit)


@dataclass
class SolveResult:
    model: list[bool] | None  # 1-based truth values; None means unsatisfiable

    @property
    def is_sat(self) -> bool:
        return self.model is not None


class Solver:
    """CDCL with two-watched literals, first-UIP learning, no restarts.

    Deterministic: decisions pick the lowest-index unassigned variable with
    false polarity.  `polarity_rng` flips polarities at random (used by tests
    to confirm that backbones do not depend on the first model found).
    """

    def __init__(self, cnf: Cnf, polarity_rng: Random | None = None,
                 verify_models: bool = True) -> None:
        self.cnf = cnf
        self.nvars = cnf.num_vars
        self.polarity_rng = polarity_rng
        self.verify_models = verify_models
        self.clauses: list[list[Lit]] = []
        self.units: list[Lit] = []
        self.has_empty = False
        self.watch: dict[Lit, list[int]] = {}
        for c in cnf.clauses:
            self._add_clause(list(c.lits))

    def _add_clause(self, lits: list[Lit]) -> None:
        if not lits:
            self.has_empty = True
            return
        if len(lits) == 1:
            self.units.append(lits[0])
            return
        self.clauses.append(lits)
        ci = len(self.clauses) - 1
        self.watch.setdefault(lits[0], []).append(ci)
        self.watch.setdefault(lits[1], []).append(ci)

    def solve(self, assumptions: list[Lit] | None = None) -> SolveResult:
        assumptions = list(assumptions or [])
        _check_assumptions(self.cnf, assumptions)
        if self.has_empty:
            return SolveResult(None)

        n = self.nvars
        value = [0] * (n + 1)
        level = [0] * (n + 1)
        reason: list[int | None] = [None] * (n + 1)
        trail: list[Lit] = []
        trail_lim: list[int] = []
        qhead = 0

        def lit_true(l: Lit) -> bool:
            return value[abs(l)] == (1 if l > 0 else -1)

        def lit_false(l: Lit) -> bool:
            return value[abs(l)] == (-1 if l > 0 else 1)

        def assign(l: Lit, r: int | None) -> None:
            value[abs(l)] = 1 if l > 0 else -1
            level[abs(l)] = len(trail_lim)
            reason[abs(l)] = r
            trail.append(l)

        def prop() -> int | None:
            nonlocal qhead
            while qhead < len(trail):
                lit = trail[qhead]
                qhead += 1
                watching = self.watch.get(-lit)
                if not watching:
                    continue
                i = 0
                while i < len(watching):
                    ci = watching[i]
                    lits = self.clauses[ci]
                    if lits[0] == -lit:
                        lits[0], lits[1] = lits[1], lits[0]
                    if lit_true(lits[0]):
                        i += 1
                        continue
                    moved = False
                    for k in range(2, len(lits)):
                        if not lit_false(lits[k]):
                            lits[1], lits[k] = lits[k], lits[1]
                            self.watch.setdefault(lits[1], []).append(ci)
                            watching[i] = watching[-1]
                            watching.pop()
                            moved = True
                            break
                    if moved:
                        continue
                    if lit_false(lits[0]):
                        return ci
                    assign(lits[0], ci)
                    i += 1
            return None

        def analyze(confl: int) -> tuple[list[Lit], int]:
            """First-UIP learned clause and its backjump level."""
            learned: list[Lit] = []
            seen: set[int] = set()
            counter = 0
            idx = len(trail) - 1
            cur = len(trail_lim)
            skip: Lit | None = None
            plit = 0
            while True:
                for l in self.clauses[confl]:
                    if l == skip:
                        continue
                    var = abs(l)
                    if var in seen or level[var] == 0:
                        continue
                    seen.add(var)
                    if level[var] == cur:
                        counter += 1
                    else:
                        learned.append(l)
                while abs(trail[idx]) not in seen:
                    idx -= 1
                plit = trail[idx]
                seen.discard(abs(plit))
                counter -= 1
                idx -= 1
                if counter == 0:
                    break
                antecedent = reason[abs(plit)]
                assert antecedent is not None, "only the UIP may lack a reason"
                confl = antecedent
                skip = plit
            learned.insert(0, -plit)
            if len(learned) == 1:
                return learned, 0
            bl = max(level[abs(l)] for l in learned[1:])
            for k in range(2, len(learned)):
                if level[abs(learned[k])] == bl:
                    learned[1], learned[k] = learned[k], learned[1]
                    break
            return learned, bl

        def backjump(target: int) -> None:
            nonlocal qhead
            while len(trail_lim) > target:
                lim = trail_lim.pop()
                while len(trail) > lim:
                    l = trail.pop()
                    value[abs(l)] = 0
            qhead = len(trail)

        for u in self.units:
            if lit_false(u):
                return SolveResult(None)
            if not lit_true(u):
                assign(u, None)

        next_var = 1
        while True:
            confl = prop()
            if confl is not None:
                if not trail_lim:
                    return SolveResult(None)
                learned, bl = analyze(confl)
                backjump(bl)
                if len(learned) == 1:
                    assign(learned[0], None)
                else:
                    self._add_clause(learned)
                    assign(learned[0], len(self.clauses) - 1)
                next_var = 1
                continue

            if len(trail_lim) < len(assumptions):
                a = assumptions[len(trail_lim)]
                if lit_false(a):
                    return SolveResult(None)
                trail_lim.append(len(trail))
                if not lit_true(a):
                    assign(a, None)
                continue

            while next_var <= n and value[next_var] != 0:
                next_var += 1
            if next_var <= n:
                polarity = bool(self.polarity_rng and self.polarity_rng.random() < 0.5)
                trail_lim.append(len(trail))
                assign(next_var if polarity else -next_var, None)
                continue

            model = [v == 1 for v in value]
            if self.verify_models:
                self._verify(model, assumptions)
            return SolveResult(model)

    def _verify(self, model: list[bool], assumptions: list[Lit]) -> None:
        def holds(l: Lit) -> bool:
            return model[abs(l)] == (l > 0)

        for c in self.cnf.clauses:
            if not any(holds(l) for l in c.lits):
                raise AssertionError(f"model violates clause {c.lits}")
        for a in assumptions:
            if not holds(a):
                raise AssertionError(f"model violates assumption {a}")


def solve(cnf: Cnf, assumptions: list[Lit] | None = None, **kwargs) -> SolveResult:
    return Solver(cnf, **kwargs).solve(assumptions)


def backbone(cnf: Cnf, assumptions: list[Lit], scope: list[int],
             solver: Solver | None = None) -> set[Lit]:
    """Literals over `scope` variables true in every model of cnf + assumptions.

    Probes the first model's scope literals one by one: an unsatisfiable
    negation confirms a backbone literal, and every satisfying counter-model
    prunes the remaining candidates.
    """
    solver = solver or Solver(cnf)
    first = solver.solve(assumptions)
    if not first.is_sat:
        raise NotSatisfiable("backbone is undefined for unsatisfiable constraints")
    model = first.model
    assert model is not None
    candidates = {v if model[v] else -v for v in scope}
    result: set[Lit] = set()
    for lit in sorted(candidates, key=abs):
        if lit not in candidates:
            continue
        probe = solver.solve(assumptions + [-lit])
        if not probe.is_sat:
            result.add(lit)
        else:
            m = probe.model
            assert m is not None
            candidates = {l for l in candidates if m[abs(l)] == (l > 0)}
    return result


_DIMACS_HEADER = re.compile(r"p\s+cnf\s+(\d+)\s+(\d+)")


def read_dimacs(text: str) -> Cnf:
    """Ingest a DIMACS file for standalone engine testing."""
    from .cnf import DERIVED, VarTag

    header = None
    clause_lits: list[tuple[Lit, ...]] = []
    pending: list[str] = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("c"):
            continue
        if header is None:
            m = _DIMACS_HEADER.match(line)
            if not m:
                raise ValueError(f"expected DIMACS header, got {line!r}")
            header = (int(m.group(1)), int(m.group(2)))
            continue
        pending.extend(line.split())
        while "0" in pending:
            k = pending.index("0")
            clause_lits.append(tuple(int(t) for t in pending[:k]))
            pending = pending[k + 1:]
    if header is None:
        raise ValueError("missing DIMACS header")
    cnf = Cnf("strong")
    for v in range(1, header[0] + 1):
        cnf.add_var(VarTag("x", 0, v))
    for lits in clause_lits:
        cnf.add_clause(lits, DERIVED)
    return cnf
