"""Unit-resolution proofs: derivation, s-expression round trip, checking.

Proof texts follow the grammar

    proof      := expr
    expr       := letexpr | resolution | leaf
    letexpr    := "(let" "(" binding+ ")" expr ")"
    binding    := "(" bindname expr ")"
    resolution := "(unit-resolution" expr expr+ conclusion ")"
    leaf       := "(asserted" clause ")" | bindname | litname
    conclusion := "false" | clause | litname
    clause     := litname | "(or" litname+ ")"
    litname    := varname | "(not" varname ")"
    varname    := "c" digit digit "_" digit digit
    bindname   := "a!" nat

Canonical serialization uses single spaces; subproofs used more than once
are emitted as let bindings, subproofs used once are inlined.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator, Union

from .cnf import Cnf, Lit, var_name
from .sat import ASSUMED, Solver, UnitPropagator

_VARNAME_RE = re.compile(r"^c\d\d_\d\d$")
_BINDNAME_RE = re.compile(r"^a!\d+$")


class ProofSyntaxError(ValueError):
    def __init__(self, message: str, position: int) -> None:
        super().__init__(f"{message} (at position {position})")
        self.position = position


class UnboundBinding(ValueError):
    def __init__(self, name: str, position: int = -1) -> None:
        super().__init__(f"unbound binding {name}")
        self.name = name
        self.position = position


class BadVariableName(ValueError):
    pass


# -- AST ---------------------------------------------------------------------


@dataclass(frozen=True)
class SLit:
    """A literal over proof variable names."""

    var: str
    positive: bool = True

    @property
    def text(self) -> str:
        return self.var if self.positive else f"(not {self.var})"

    def negated(self) -> "SLit":
        return SLit(self.var, not self.positive)


SClause = tuple[SLit, ...]


class ProofNode:
    __slots__ = ()


class LitLeaf(ProofNode):
    """A bare asserted unit clause, printed as just the literal."""

    __slots__ = ("lit",)

    def __init__(self, lit: SLit) -> None:
        self.lit = lit


class Asserted(ProofNode):
    __slots__ = ("clause",)

    def __init__(self, clause: SClause) -> None:
        self.clause = clause


class Resolution(ProofNode):
    """main resolved against unit subproofs; conclusion () means false."""

    __slots__ = ("main", "units", "conclusion")

    def __init__(self, main: ProofNode, units: tuple[ProofNode, ...],
                 conclusion: SClause) -> None:
        self.main = main
        self.units = units
        self.conclusion = conclusion


class Ref(ProofNode):
    __slots__ = ("name",)

    def __init__(self, name: str) -> None:
        self.name = name


class Let(ProofNode):
    __slots__ = ("bindings", "body")

    def __init__(self, bindings: tuple[tuple[str, ProofNode], ...], body: ProofNode) -> None:
        self.bindings = bindings
        self.body = body


def clause_text(clause: SClause) -> str:
    if len(clause) == 0:
        return "false"
    if len(clause) == 1:
        return clause[0].text
    return "(or " + " ".join(l.text for l in clause) + ")"


# -- serialization -----------------------------------------------------------


def _shared_resolutions(root: ProofNode) -> list[ProofNode]:
    """Resolution nodes referenced more than once, in definition order.

    Definition order puts a binding before every binding that uses it and
    before the body, matching the shape of solver-printed proofs.
    """
    counts: dict[int, int] = {}
    nodes: dict[int, ProofNode] = {}
    stack = [root]
    while stack:
        node = stack.pop()
        if isinstance(node, Resolution):
            counts[id(node)] = counts.get(id(node), 0) + 1
            if counts[id(node)] > 1:
                continue
            nodes[id(node)] = node
            stack.append(node.main)
            stack.extend(node.units)
        elif isinstance(node, Let):
            stack.append(node.body)
            stack.extend(expr for _, expr in node.bindings)
    shared_ids = {i for i, c in counts.items() if c > 1}
    if not shared_ids:
        return []
    order: list[ProofNode] = []
    seen: set[int] = set()

    def visit(node: ProofNode) -> None:
        todo: list[tuple[ProofNode, bool]] = [(node, False)]
        while todo:
            cur, done = todo.pop()
            if isinstance(cur, Resolution):
                if done:
                    if id(cur) in shared_ids and id(cur) not in seen:
                        seen.add(id(cur))
                        order.append(cur)
                    continue
                if id(cur) in seen:
                    continue
                todo.append((cur, True))
                for child in reversed((cur.main, *cur.units)):
                    todo.append((child, False))

    visit(root)
    return order


def serialize_proof(proof: ProofNode) -> str:
    """Canonical single-space s-expression for a proof."""
    shared = _shared_resolutions(proof)
    names = {id(node): f"a!{i + 1}" for i, node in enumerate(shared)}

    def emit(node: ProofNode, out: list[str], defining: int | None) -> None:
        stack: list[Union[str, ProofNode]] = [node]
        while stack:
            item = stack.pop()
            if isinstance(item, str):
                out.append(item)
            elif isinstance(item, Resolution):
                name = names.get(id(item))
                if name is not None and id(item) != defining:
                    out.append(name)
                    continue
                out.append("(unit-resolution ")
                stack.append(")")
                stack.append(clause_text(item.conclusion))
                for u in reversed(item.units):
                    stack.append(u)
                    stack.append(" ")
                stack.append(" ")
                stack.append(item.main)
            elif isinstance(item, LitLeaf):
                out.append(item.lit.text)
            elif isinstance(item, Asserted):
                out.append(f"(asserted {clause_text(item.clause)})")
            elif isinstance(item, Ref):
                out.append(item.name)
            elif isinstance(item, Let):
                parts: list[Union[str, ProofNode]] = ["(let ("]
                for i, (bname, expr) in enumerate(item.bindings):
                    if i:
                        parts.append(" ")
                    parts.extend((f"({bname} ", expr, ")"))
                parts.extend((") ", item.body, ")"))
                stack.extend(reversed(parts))
            else:
                raise TypeError(f"unknown proof node {item!r}")

    out: list[str] = []
    if shared:
        out.append("(let (")
        for i, node in enumerate(shared):
            if i:
                out.append(" ")
            out.append(f"({names[id(node)]} ")
            emit(node, out, defining=id(node))
            out.append(")")
        out.append(") ")
        emit(proof, out, defining=None)
        out.append(")")
    else:
        emit(proof, out, defining=None)
    return "".join(out)


def proof_size(proof: ProofNode) -> int:
    """Character count of the canonical serialization."""
    return len(serialize_proof(proof))


def iter_leaf_clauses(proof: ProofNode) -> Iterator[SClause]:
    """Asserted leaf clauses in first-appearance (serialization) order.

    Shared subproofs contribute their leaves once, at their definition.
    """
    shared = _shared_resolutions(proof)
    emitted: set[int] = set()

    def walk(node: ProofNode) -> Iterator[SClause]:
        stack = [node]
        while stack:
            cur = stack.pop()
            if isinstance(cur, LitLeaf):
                yield (cur.lit,)
            elif isinstance(cur, Asserted):
                yield cur.clause
            elif isinstance(cur, Resolution):
                if id(cur) in emitted:
                    continue
                emitted.add(id(cur))
                for child in reversed((cur.main, *cur.units)):
                    stack.append(child)
            elif isinstance(cur, Let):
                parts = [expr for _, expr in cur.bindings] + [cur.body]
                stack.extend(reversed(parts))

    for node in shared:
        emitted.add(id(node))
    for node in shared:
        emitted.discard(id(node))
        yield from walk(node)
    yield from walk(proof)


def leaf_clause_set(proof: ProofNode) -> set[frozenset[SLit]]:
    return {frozenset(c) for c in iter_leaf_clauses(proof)}


# -- parsing -----------------------------------------------------------------


_TOKEN_RE = re.compile(r"\(|\)|[^\s()]+")


def _tokenize(text: str) -> list[tuple[str, int]]:
    tokens = []
    pos = 0
    for m in _TOKEN_RE.finditer(text):
        tokens.append((m.group(0), m.start()))
    stray = re.sub(r"[\s()]|[^\s()]+", "", text)
    assert not stray
    return tokens


def _parse_sexpr(tokens: list[tuple[str, int]], i: int):
    """Returns (tree, next_index); tree is an atom (str, pos) or a list."""
    if i >= len(tokens):
        raise ProofSyntaxError("unexpected end of input", -1)
    tok, pos = tokens[i]
    if tok == "(":
        items = []
        i += 1
        while True:
            if i >= len(tokens):
                raise ProofSyntaxError("missing )", pos)
            if tokens[i][0] == ")":
                return (items, pos), i + 1
            sub, i = _parse_sexpr(tokens, i)
            items.append(sub)
    if tok == ")":
        raise ProofSyntaxError("unexpected )", pos)
    return (tok, pos), i + 1


def _is_atom(tree) -> bool:
    return isinstance(tree[0], str)


def _atom(tree) -> str:
    return tree[0]


def _parse_litname(tree) -> SLit:
    if _is_atom(tree):
        name = _atom(tree)
        if not _VARNAME_RE.match(name):
            raise BadVariableName(f"bad proof variable name {name!r}")
        return SLit(name, True)
    items, pos = tree
    if len(items) == 2 and _is_atom(items[0]) and _atom(items[0]) == "not":
        if not _is_atom(items[1]):
            raise ProofSyntaxError("(not ...) takes a variable name", pos)
        name = _atom(items[1])
        if not _VARNAME_RE.match(name):
            raise BadVariableName(f"bad proof variable name {name!r}")
        return SLit(name, False)
    raise ProofSyntaxError("expected a literal", pos)


def _parse_clause(tree) -> SClause:
    if not _is_atom(tree):
        items, pos = tree
        if items and _is_atom(items[0]) and _atom(items[0]) == "or":
            if len(items) < 2:
                raise ProofSyntaxError("(or ...) needs literals", pos)
            return tuple(_parse_litname(t) for t in items[1:])
    return (_parse_litname(tree),)


def _parse_conclusion(tree) -> SClause:
    if _is_atom(tree) and _atom(tree) == "false":
        return ()
    return _parse_clause(tree)


def _parse_expr(tree, scope: set[str]) -> ProofNode:
    if _is_atom(tree):
        name, pos = tree
        if _BINDNAME_RE.match(name):
            if name not in scope:
                raise UnboundBinding(name, pos)
            return Ref(name)
        if name == "false":
            raise ProofSyntaxError("false is not a proof", pos)
        if not _VARNAME_RE.match(name):
            raise BadVariableName(f"bad proof variable name {name!r}")
        return LitLeaf(SLit(name, True))

    items, pos = tree
    if not items or not _is_atom(items[0]):
        raise ProofSyntaxError("expected let, unit-resolution, asserted, or not", pos)
    head = _atom(items[0])

    if head == "not":
        return LitLeaf(_parse_litname(tree))

    if head == "asserted":
        if len(items) != 2:
            raise ProofSyntaxError("(asserted ...) takes one clause", pos)
        return Asserted(_parse_clause(items[1]))

    if head == "unit-resolution":
        if len(items) < 4:
            raise ProofSyntaxError("(unit-resolution ...) needs a main proof, "
                                   "at least one unit, and a conclusion", pos)
        main = _parse_expr(items[1], scope)
        units = tuple(_parse_expr(t, scope) for t in items[2:-1])
        conclusion = _parse_conclusion(items[-1])
        return Resolution(main, units, conclusion)

    if head == "let":
        if len(items) != 3 or _is_atom(items[1]):
            raise ProofSyntaxError("(let ((name expr)...) body)", pos)
        binding_trees = items[1][0]
        if not binding_trees:
            raise ProofSyntaxError("let needs at least one binding", pos)
        inner = set(scope)
        bindings = []
        for bt in binding_trees:
            if _is_atom(bt):
                raise ProofSyntaxError("binding must be (name expr)", bt[1])
            bitems, bpos = bt
            if len(bitems) != 2 or not _is_atom(bitems[0]):
                raise ProofSyntaxError("binding must be (name expr)", bpos)
            bname = _atom(bitems[0])
            if not _BINDNAME_RE.match(bname):
                raise ProofSyntaxError(f"bad binding name {bname!r}", bpos)
            bindings.append((bname, _parse_expr(bitems[1], inner)))
            inner.add(bname)
        body = _parse_expr(items[2], inner)
        return Let(tuple(bindings), body)

    raise ProofSyntaxError(f"unknown form {head!r}", pos)


def parse_proof(text: str) -> ProofNode:
    tokens = _tokenize(text)
    if not tokens:
        raise ProofSyntaxError("empty proof text", 0)
    tree, nxt = _parse_sexpr(tokens, 0)
    if nxt != len(tokens):
        raise ProofSyntaxError("trailing tokens after proof", tokens[nxt][1])
    return _parse_expr(tree, set())


# -- checking ----------------------------------------------------------------


@dataclass(frozen=True)
class ProofCheck:
    ok: bool
    failure: str = ""
    at: str = ""  # serialized snippet of the offending node

    def __bool__(self) -> bool:
        return self.ok


class _CheckFailure(Exception):
    def __init__(self, failure: str, node: ProofNode) -> None:
        self.failure = failure
        self.node = node


def check_proof(proof: ProofNode, source: Cnf, assumptions: list[Lit],
                expected: Lit | None = None) -> ProofCheck:
    """Replay a proof against the source clauses and assumption units.

    Verifies each asserted leaf, each resolvent, and that the root concludes
    false (or the expected literal).  Independent of how proofs are derived.
    """
    assumed = set(assumptions)

    def to_int(lit: SLit) -> Lit:
        try:
            return source.parse_lit(lit.text)
        except ValueError as e:
            raise _CheckFailure(str(e), LitLeaf(lit)) from None

    def leaf_ok(lits: frozenset[Lit]) -> bool:
        if source.clause_index(lits) is not None:
            return True
        if len(lits) == 1:
            (lit,) = lits
            return lit in assumed
        return False

    def evaluate(node: ProofNode, env: dict[str, frozenset[Lit]]) -> frozenset[Lit]:
        # Iterative post-order evaluation; results keyed by node identity.
        results: dict[int, frozenset[Lit]] = {}
        stack: list[tuple[ProofNode, bool, dict[str, frozenset[Lit]]]] = [(node, False, env)]
        while stack:
            cur, done, scope = stack.pop()
            if id(cur) in results and not isinstance(cur, Ref):
                continue
            if isinstance(cur, LitLeaf):
                lit = to_int(cur.lit)
                if not leaf_ok(frozenset((lit,))):
                    raise _CheckFailure("leaf not asserted in source or assumptions", cur)
                results[id(cur)] = frozenset((lit,))
            elif isinstance(cur, Asserted):
                lits = frozenset(to_int(l) for l in cur.clause)
                if not leaf_ok(lits):
                    raise _CheckFailure("leaf not asserted in source or assumptions", cur)
                results[id(cur)] = lits
            elif isinstance(cur, Ref):
                if cur.name not in scope:
                    raise _CheckFailure(f"unbound binding {cur.name}", cur)
                results[id(cur)] = scope[cur.name]
            elif isinstance(cur, Resolution):
                children = (cur.main, *cur.units)
                if not done:
                    stack.append((cur, True, scope))
                    for child in children:
                        stack.append((child, False, scope))
                    continue
                resolvent = set(results[id(cur.main)])
                for unit in cur.units:
                    u = results[id(unit)]
                    if len(u) != 1:
                        raise _CheckFailure("unit operand does not prove a single literal", unit)
                    (ulit,) = u
                    if -ulit not in resolvent:
                        raise _CheckFailure(
                            "resolved literal does not occur negated in the main clause", unit)
                    resolvent.discard(-ulit)
                stated = frozenset(to_int(l) for l in cur.conclusion)
                if frozenset(resolvent) != stated:
                    raise _CheckFailure("stated conclusion is not the resolvent", cur)
                results[id(cur)] = stated
            elif isinstance(cur, Let):
                if not done:
                    # evaluate bindings sequentially, then the body
                    new_scope = dict(scope)
                    for bname, expr in cur.bindings:
                        new_scope[bname] = evaluate(expr, dict(new_scope))
                    stack.append((cur, True, new_scope))
                    stack.append((cur.body, False, new_scope))
                    continue
                results[id(cur)] = results[id(cur.body)]
            else:
                raise _CheckFailure(f"unknown node {cur!r}", cur)
        return results[id(node)]

    try:
        root = evaluate(proof, {})
    except _CheckFailure as f:
        snippet = serialize_proof(f.node)
        return ProofCheck(False, f.failure, snippet[:120])
    if expected is not None:
        if root != frozenset((expected,)):
            return ProofCheck(False, f"root does not conclude the expected literal", "")
    elif len(root) > 1:
        return ProofCheck(False, "root concludes neither false nor a single literal", "")
    return ProofCheck(True)


# -- weak proof derivation ----------------------------------------------------


@dataclass
class WeakProof:
    node: ProofNode
    text: str
    size: int


@dataclass
class NoWeakProof:
    """The weak constraints plus the goal negation are satisfiable."""

    witness: list[Lit]  # cell-clear literals true in the witness model


@dataclass
class NonUnitUnsat:
    """Unsatisfiable, but not by unit propagation alone (never seen in practice)."""


WeakProofOutcome = Union[WeakProof, NoWeakProof, NonUnitUnsat]


class WeakEngine:
    """Shared propagation/solving state for one weak CNF.

    Keeps the established-unit propagation prefix on the trail so that
    probing one subgoal costs only its own consequences.
    """

    def __init__(self, cnf: Cnf) -> None:
        self.cnf = cnf
        self.prop = UnitPropagator(cnf)
        self.solver = Solver(cnf)
        self._established: list[Lit] = []
        self._established_set: set[Lit] = set()
        self._prefix_mark = self.prop.base_mark
        if self.prop.base_conflict is not None:
            raise ValueError("weak constraints are unsatisfiable on their own")

    @property
    def established(self) -> list[Lit]:
        return list(self._established)

    def set_established(self, units: list[Lit]) -> None:
        self.prop.undo_to(self.prop.base_mark)
        conflict = self.prop.assume(list(units))
        if conflict is not None:
            raise ValueError("established units contradict the weak constraints")
        self._established = list(units)
        self._established_set = set(units)
        self._prefix_mark = self.prop.mark()

    def reset_probe(self) -> None:
        self.prop.undo_to(self._prefix_mark)

    def try_unit_proof(self, subgoal: Lit) -> WeakProof | None:
        """The unit-resolution proof propagation yields, or None if none exists yet."""
        prop = self.prop
        self.reset_probe()
        if prop.lit_value(subgoal) == 1:
            return _package(self._forced_proof(subgoal))
        if prop.lit_value(subgoal) == -1:
            raise ValueError("established units already contradict the subgoal")
        assumption = -subgoal
        conflict = prop.assume([assumption])
        if conflict is None:
            self.reset_probe()
            return None
        node = self._refutation_proof(conflict, assumption)
        self.reset_probe()
        return _package(node)

    def derive(self, subgoal: Lit) -> WeakProofOutcome:
        """derive_weak_proof against the current established units."""
        proof = self.try_unit_proof(subgoal)
        if proof is not None:
            return proof
        result = self.solver.solve(self._established + [-subgoal])
        if result.is_sat:
            model = result.model
            assert model is not None
            witness = [v if model[v] else -v for v in self.cnf.cell_vars()]
            return NoWeakProof(witness)
        return NonUnitUnsat()

    # -- proof construction --------------------------------------------------

    def _slit(self, lit: Lit) -> SLit:
        return SLit(var_name(self.cnf.tag_of(abs(lit))), lit > 0)

    def _sclause(self, lits: tuple[Lit, ...]) -> SClause:
        return tuple(self._slit(l) for l in lits)

    def _leaf(self, lit: Lit) -> ProofNode:
        return Asserted((self._slit(lit),))

    def _build_nodes(self, roots: list[Lit], assumption: Lit | None) -> dict[Lit, ProofNode]:
        """Bottom-up memoized subproofs for every literal the roots depend on."""
        prop, cnf = self.prop, self.cnf
        needed: set[Lit] = set()
        stack = list(roots)
        while stack:
            lit = stack.pop()
            if lit in needed:
                continue
            needed.add(lit)
            ante = prop.antecedent_of(lit)
            if ante == ASSUMED or len(cnf.clauses[ante].lits) == 1:
                continue
            stack.extend(-l for l in cnf.clauses[ante].lits if l != lit)

        memo: dict[Lit, ProofNode] = {}
        for lit in sorted(needed, key=prop.position):
            ante = prop.antecedent_of(lit)
            if ante == ASSUMED:
                memo[lit] = self._leaf(lit)  # established unit or the goal assumption
                continue
            clause = cnf.clauses[ante].lits
            if len(clause) == 1:
                memo[lit] = self._leaf(lit)  # source unit clause
                continue
            memo[lit] = self._step(clause, lit, memo, assumption)
        return memo

    def _step(self, clause: tuple[Lit, ...], conclusion: Lit | None,
              memo: dict[Lit, ProofNode], assumption: Lit | None) -> ProofNode:
        """One unit-resolution step deriving `conclusion` from `clause`.

        Literals falsified by the goal assumption itself are discharged in a
        final outer resolution, after everything propagation derived.
        """
        prop = self.prop
        falsified = [l for l in clause if l != conclusion]
        by_assumption = [l for l in falsified if assumption is not None and -l == assumption]
        rest = [l for l in falsified if not (assumption is not None and -l == assumption)]
        rest.sort(key=lambda l: -prop.position(-l))
        main: ProofNode = Asserted(self._sclause(clause))
        remaining = [l for l in clause if l == conclusion or l in by_assumption]
        if by_assumption and rest:
            inner_concl = self._sclause(tuple(remaining))
            inner = Resolution(main, tuple(memo[-l] for l in rest), inner_concl)
            final = () if conclusion is None else (self._slit(conclusion),)
            units = tuple(self._leaf(assumption) for _ in by_assumption)
            return Resolution(inner, units, final)
        units = tuple(memo[-l] for l in rest)
        units += tuple(self._leaf(assumption) for _ in by_assumption)
        final = () if conclusion is None else (self._slit(conclusion),)
        return Resolution(main, units, final)

    def _forced_proof(self, subgoal: Lit) -> ProofNode:
        prop, cnf = self.prop, self.cnf
        ante = prop.antecedent_of(subgoal)
        if ante == ASSUMED:
            raise ValueError("subgoal is already an established unit")
        clause = cnf.clauses[ante].lits
        if len(clause) == 1:
            return LitLeaf(self._slit(subgoal))  # degenerate one-token proof
        deps = [-l for l in clause if l != subgoal]
        memo = self._build_nodes(deps, assumption=None)
        return self._step(clause, subgoal, memo, assumption=None)

    def _refutation_proof(self, conflict: int, assumption: Lit) -> ProofNode:
        cnf = self.cnf
        clause = cnf.clauses[conflict].lits
        deps = [-l for l in clause if -l != assumption]
        memo = self._build_nodes(deps, assumption)
        return self._step(clause, None, memo, assumption)


def _package(node: ProofNode) -> WeakProof:
    text = serialize_proof(node)
    return WeakProof(node, text, len(text))


def derive_weak_proof(weak: Cnf, established: list[Lit], subgoal: Lit,
                      engine: WeakEngine | None = None) -> WeakProofOutcome:
    """Prove one subgoal from the weak constraints and established units.

    Returns a unit-resolution proof when propagation finds one, a witness
    model when the goal negation is weakly satisfiable, and NonUnitUnsat in
    the (empirically unseen) remaining case.
    """
    engine = engine or WeakEngine(weak)
    engine.set_established(established)
    return engine.derive(subgoal)
