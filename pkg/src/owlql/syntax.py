"""Knowledge-base and query values, with parsers and printers for the text formats.

Ontology files hold one axiom per line::

    A(x) -> B(x)
    A(x) -> exists P(x,_)
    exists P(_,x) -> A(x)
    P(x,y) -> R(y,x)
    A(x), B(x) -> false
    P(x,y), R(x,y) -> false

Data files hold ground facts ``A(a).`` and ``P(a,b).``; query files hold a single
rule ``q(x1,x2) :- P(x1,y), A(y)``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Union


class ParseError(ValueError):
    """Raised on malformed input; carries a 1-based line and column."""

    def __init__(self, message: str, line: int = 1, column: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


# Roles and concepts


@dataclass(frozen=True, order=True)
class Role:
    name: str
    inverted: bool = False

    @property
    def inv(self) -> "Role":
        return Role(self.name, not self.inverted)

    def __str__(self) -> str:
        return self.name + ("-" if self.inverted else "")

    @classmethod
    def parse(cls, text: str) -> "Role":
        text = text.strip()
        if text.endswith("-"):
            return cls(text[:-1], True)
        return cls(text)


@dataclass(frozen=True, order=True)
class AtomicConcept:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, order=True)
class ExistsRole:
    """The concept ``exists y. role(x, y)``."""

    role: Role

    def __str__(self) -> str:
        return f"E{self.role}"


ConceptExpr = Union[AtomicConcept, ExistsRole]


def concept_key(c: ConceptExpr) -> tuple:
    if isinstance(c, AtomicConcept):
        return (0, c.name, False)
    return (1, c.role.name, c.role.inverted)


# Axioms


@dataclass(frozen=True)
class ConceptIncl:
    lhs: ConceptExpr
    rhs: ConceptExpr


@dataclass(frozen=True)
class RoleIncl:
    lhs: Role
    rhs: Role

    def __post_init__(self):
        # inv(P) <= R is the same axiom as P <= inv(R); keep the lhs uninverted
        if self.lhs.inverted:
            object.__setattr__(self, "lhs", self.lhs.inv)
            object.__setattr__(self, "rhs", self.rhs.inv)


@dataclass(frozen=True)
class ConceptDisj:
    first: ConceptExpr
    second: ConceptExpr


@dataclass(frozen=True)
class RoleDisj:
    first: Role
    second: Role

    def __post_init__(self):
        if self.first.inverted:
            object.__setattr__(self, "first", self.first.inv)
            object.__setattr__(self, "second", self.second.inv)


Axiom = Union[ConceptIncl, RoleIncl, ConceptDisj, RoleDisj]


def _concept_size(c: ConceptExpr) -> int:
    return 1 if isinstance(c, AtomicConcept) else 2


def _axiom_size(ax: Axiom) -> int:
    if isinstance(ax, ConceptIncl):
        return _concept_size(ax.lhs) + _concept_size(ax.rhs) + 1
    if isinstance(ax, ConceptDisj):
        return _concept_size(ax.first) + _concept_size(ax.second) + 1
    return 3


@dataclass(frozen=True)
class Ontology:
    axioms: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "axioms", tuple(self.axioms))

    @cached_property
    def concept_names(self) -> frozenset:
        names = set()
        for ax in self.axioms:
            for c in _axiom_concepts(ax):
                if isinstance(c, AtomicConcept):
                    names.add(c.name)
        return frozenset(names)

    @cached_property
    def role_names(self) -> frozenset:
        names = set()
        for ax in self.axioms:
            if isinstance(ax, RoleIncl):
                names.update((ax.lhs.name, ax.rhs.name))
            elif isinstance(ax, RoleDisj):
                names.update((ax.first.name, ax.second.name))
            else:
                for c in _axiom_concepts(ax):
                    if isinstance(c, ExistsRole):
                        names.add(c.role.name)
        return frozenset(names)

    @property
    def signature(self) -> frozenset:
        return self.concept_names | self.role_names

    @cached_property
    def size(self) -> int:
        """Number of symbols, counting an existential concept as two."""
        return sum(_axiom_size(ax) for ax in self.axioms)

    def __len__(self) -> int:
        return len(self.axioms)

    def extend(self, axioms: Iterable[Axiom]) -> "Ontology":
        return Ontology(self.axioms + tuple(axioms))


def _axiom_concepts(ax: Axiom) -> tuple:
    if isinstance(ax, ConceptIncl):
        return (ax.lhs, ax.rhs)
    if isinstance(ax, ConceptDisj):
        return (ax.first, ax.second)
    return ()


# Atoms, data and queries


@dataclass(frozen=True, order=True)
class Atom:
    pred: str
    args: tuple

    def __str__(self) -> str:
        return f"{self.pred}({','.join(self.args)})"

    @property
    def is_unary(self) -> bool:
        return len(self.args) == 1


@dataclass(frozen=True)
class DataInstance:
    facts: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "facts", frozenset(self.facts))

    @cached_property
    def inds(self) -> frozenset:
        return frozenset(a for f in self.facts for a in f.args)

    @cached_property
    def concept_names(self) -> frozenset:
        return frozenset(f.pred for f in self.facts if f.is_unary)

    @cached_property
    def role_names(self) -> frozenset:
        return frozenset(f.pred for f in self.facts if not f.is_unary)

    def sorted_facts(self) -> list:
        return sorted(self.facts, key=lambda f: (len(f.args), f.pred, f.args))

    def __len__(self) -> int:
        return len(self.facts)


_NUM_RE = re.compile(r"(\d+)")


def natural_key(name: str) -> tuple:
    """Sort key that orders ``y2`` before ``y10``."""
    return tuple(int(p) if p.isdigit() else p for p in _NUM_RE.split(name))


@dataclass(frozen=True)
class ConjunctiveQuery:
    answer_vars: tuple
    atoms: frozenset
    name: str = field(default="q", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "answer_vars", tuple(self.answer_vars))
        object.__setattr__(self, "atoms", frozenset(self.atoms))
        used = {v for a in self.atoms for v in a.args}
        for x in self.answer_vars:
            if x not in used:
                raise ValueError(f"answer variable {x} does not occur in the query body")

    @cached_property
    def variables(self) -> tuple:
        """All variables: answer variables first, then the rest in natural order."""
        rest = {v for a in self.atoms for v in a.args} - set(self.answer_vars)
        return tuple(dict.fromkeys(self.answer_vars)) + tuple(sorted(rest, key=natural_key))

    @cached_property
    def existential_vars(self) -> tuple:
        avars = set(self.answer_vars)
        return tuple(v for v in self.variables if v not in avars)

    @cached_property
    def signature(self) -> frozenset:
        return frozenset(a.pred for a in self.atoms)

    @cached_property
    def concept_names(self) -> frozenset:
        return frozenset(a.pred for a in self.atoms if a.is_unary)

    @cached_property
    def role_names(self) -> frozenset:
        return frozenset(a.pred for a in self.atoms if not a.is_unary)

    def sorted_atoms(self) -> list:
        order = {v: i for i, v in enumerate(self.variables)}
        return sorted(self.atoms, key=lambda a: (tuple(order[v] for v in a.args), a.pred))

    @cached_property
    def graph(self) -> dict:
        """Adjacency sets of the undirected variable graph (self-loops dropped)."""
        adj = {v: set() for v in self.variables}
        for a in self.atoms:
            if len(a.args) == 2 and a.args[0] != a.args[1]:
                u, v = a.args
                adj[u].add(v)
                adj[v].add(u)
        return {v: frozenset(ns) for v, ns in adj.items()}

    @property
    def size(self) -> int:
        return len(self.atoms)

    def __len__(self) -> int:
        return len(self.atoms)

    def with_atoms(self, atoms: Iterable[Atom], answer_vars: tuple | None = None) -> "ConjunctiveQuery":
        return ConjunctiveQuery(self.answer_vars if answer_vars is None else answer_vars, atoms, self.name)


# Parsing

_IDENT = r"[A-Za-z][A-Za-z0-9_']*"
_ATOM_RE = re.compile(
    r"\s*(?P<exists>exists\s+)?(?P<pred>" + _IDENT + r")\s*\(\s*(?P<args>[^()]*)\)\s*"
)
_IDENT_RE = re.compile(_IDENT + r"\Z")


def _split_atoms(text: str, line: int, offset: int = 0) -> list:
    """Split ``atom, atom, ...`` into (exists, pred, args, column) tuples."""
    pos = 0
    out = []
    while pos < len(text):
        m = _ATOM_RE.match(text, pos)
        if not m:
            raise ParseError(f"expected an atom near {text[pos:pos + 20]!r}", line, offset + pos + 1)
        args = [a.strip() for a in m.group("args").split(",")] if m.group("args").strip() else []
        out.append((bool(m.group("exists")), m.group("pred"), args, offset + m.start("pred") + 1))
        pos = m.end()
        if pos < len(text):
            if text[pos] != ",":
                raise ParseError(f"expected ',' near {text[pos:pos + 20]!r}", line, offset + pos + 1)
            pos += 1
    return out


def _parse_concept(exists, pred, args, var, line, col) -> ConceptExpr:
    if exists:
        if len(args) != 2 or "_" not in args or var not in args:
            raise ParseError(f"existential concept must be exists {pred}({var},_) or exists {pred}(_,{var})", line, col)
        return ExistsRole(Role(pred, args[0] == "_"))
    if len(args) != 1 or args[0] != var:
        raise ParseError(f"concept atom {pred} must be over the variable {var}", line, col)
    return AtomicConcept(pred)


def _parse_role(pred, args, pair, line, col) -> Role:
    if len(args) != 2:
        raise ParseError(f"role atom {pred} needs two arguments", line, col)
    if tuple(args) == pair:
        return Role(pred)
    if tuple(args) == pair[::-1]:
        return Role(pred, True)
    raise ParseError(f"role atom {pred}({','.join(args)}) uses unexpected variables", line, col)


def _concept_var(exists, args) -> str:
    if exists:
        named = [a for a in args if a != "_"]
        return named[0] if named else "_"
    return args[0] if args else "_"


def _parse_axiom(text: str, line: int) -> Axiom:
    if "->" not in text:
        raise ParseError("axiom must contain '->'", line, 1)
    lhs_text, rhs_text = text.split("->", 1)
    rhs_off = len(lhs_text) + 2
    lhs = _split_atoms(lhs_text, line)
    if not lhs:
        raise ParseError("empty left-hand side", line, 1)
    rhs_stripped = rhs_text.strip()
    is_role = not lhs[0][0] and len(lhs[0][2]) == 2
    if is_role:
        pair = tuple(lhs[0][2])
        if pair[0] == pair[1] or "_" in pair:
            raise ParseError("role axioms need two distinct variables", line, lhs[0][3])
        roles = [_parse_role(p, a, pair, line, c) for e, p, a, c in lhs if not e] if all(not e for e, *_ in lhs) else None
        if roles is None:
            raise ParseError("cannot mix role and concept atoms", line, 1)
        if rhs_stripped == "false":
            if len(roles) != 2:
                raise ParseError("disjointness needs exactly two atoms", line, 1)
            return RoleDisj(roles[0], roles[1])
        if len(roles) != 1:
            raise ParseError("inclusion needs exactly one left-hand atom", line, 1)
        rhs = _split_atoms(rhs_text, line, rhs_off)
        if len(rhs) != 1 or rhs[0][0]:
            raise ParseError("unknown arrow form: role inclusion needs one role atom on the right", line, rhs_off + 1)
        _, p, a, c = rhs[0]
        return RoleIncl(roles[0], _parse_role(p, a, pair, line, c))
    var = _concept_var(lhs[0][0], lhs[0][2])
    if var == "_":
        raise ParseError("concept atom needs a variable", line, lhs[0][3])
    concepts = [_parse_concept(e, p, a, var, line, c) for e, p, a, c in lhs]
    if rhs_stripped == "false":
        if len(concepts) != 2:
            raise ParseError("disjointness needs exactly two atoms", line, 1)
        return ConceptDisj(concepts[0], concepts[1])
    if len(concepts) != 1:
        raise ParseError("inclusion needs exactly one left-hand atom", line, 1)
    rhs = _split_atoms(rhs_text, line, rhs_off)
    if len(rhs) != 1:
        raise ParseError("unknown arrow form: expected one right-hand atom", line, rhs_off + 1)
    e, p, a, c = rhs[0]
    return ConceptIncl(concepts[0], _parse_concept(e, p, a, var, line, c))


def _check_arities(items: Iterable[tuple], line_of=None):
    arity: dict = {}
    for pred, n, line in items:
        if arity.setdefault(pred, (n, line))[0] != n:
            raise ParseError(f"predicate {pred} used with arities {arity[pred][0]} and {n}", line, 1)


def _axiom_arities(ax: Axiom, line: int):
    for c in _axiom_concepts(ax):
        if isinstance(c, AtomicConcept):
            yield c.name, 1, line
        else:
            yield c.role.name, 2, line
    if isinstance(ax, RoleIncl):
        yield ax.lhs.name, 2, line
        yield ax.rhs.name, 2, line
    elif isinstance(ax, RoleDisj):
        yield ax.first.name, 2, line
        yield ax.second.name, 2, line


def _strip_comment(line: str) -> str:
    return line.split("#", 1)[0].strip()


def parse_ontology(text: str) -> Ontology:
    axioms = []
    arities = []
    for n, raw in enumerate(text.splitlines(), 1):
        body = _strip_comment(raw)
        if not body:
            continue
        ax = _parse_axiom(body, n)
        axioms.append(ax)
        arities.extend(_axiom_arities(ax, n))
    _check_arities(arities)
    return Ontology(tuple(axioms))


_FACT_RE = re.compile(r"\s*(?P<pred>" + _IDENT + r")\s*\(\s*(?P<args>[^()]*)\)\s*\.")


def parse_data(text: str) -> DataInstance:
    facts = set()
    arities = []
    for n, raw in enumerate(text.splitlines(), 1):
        body = _strip_comment(raw)
        pos = 0
        while pos < len(body):
            m = _FACT_RE.match(body, pos)
            if not m:
                raise ParseError(f"expected a fact 'P(a,b).' near {body[pos:pos + 20]!r}", n, pos + 1)
            args = tuple(a.strip() for a in m.group("args").split(","))
            if len(args) not in (1, 2) or not all(_IDENT_RE.match(a) or a.isdigit() for a in args):
                raise ParseError(f"bad arguments in fact {m.group('pred')}", n, pos + 1)
            facts.add(Atom(m.group("pred"), args))
            arities.append((m.group("pred"), len(args), n))
            pos = m.end()
            while pos < len(body) and body[pos].isspace():
                pos += 1
    _check_arities(arities)
    return DataInstance(frozenset(facts))


_HEAD_RE = re.compile(r"\s*(?P<name>" + _IDENT + r")\s*\(\s*(?P<args>[^()]*)\)\s*:-")


def parse_query(text: str) -> ConjunctiveQuery:
    lines = [(n, _strip_comment(raw)) for n, raw in enumerate(text.splitlines(), 1)]
    lines = [(n, b) for n, b in lines if b]
    if not lines:
        raise ParseError("empty query", 1, 1)
    n = lines[0][0]
    body = " ".join(b for _, b in lines).rstrip(".").rstrip()
    m = _HEAD_RE.match(body)
    if not m:
        raise ParseError("query must look like q(x,...) :- atom, ...", n, 1)
    head_args = [a.strip() for a in m.group("args").split(",")] if m.group("args").strip() else []
    atoms = set()
    arities = []
    for exists, pred, args, col in _split_atoms(body[m.end():], n, m.end()):
        if exists:
            raise ParseError("'exists' is not allowed in query bodies", n, col)
        if len(args) not in (1, 2):
            raise ParseError(f"atom {pred} must be unary or binary", n, col)
        for a in args:
            if not _IDENT_RE.match(a):
                raise ParseError(f"constant {a!r} in query body; queries must be constant-free", n, col)
        atoms.add(Atom(pred, tuple(args)))
        arities.append((pred, len(args), n))
    _check_arities(arities)
    used = {v for a in atoms for v in a.args}
    for x in head_args:
        if not _IDENT_RE.match(x):
            raise ParseError(f"bad answer variable {x!r}", n, 1)
        if x not in used:
            raise ParseError(f"answer variable {x} does not occur in the body", n, 1)
    return ConjunctiveQuery(tuple(head_args), frozenset(atoms), m.group("name"))


# Printing


def _print_concept(c: ConceptExpr, var: str = "x") -> str:
    if isinstance(c, AtomicConcept):
        return f"{c.name}({var})"
    if c.role.inverted:
        return f"exists {c.role.name}(_,{var})"
    return f"exists {c.role.name}({var},_)"


def _print_role(r: Role) -> str:
    return f"{r.name}(y,x)" if r.inverted else f"{r.name}(x,y)"


def print_axiom(ax: Axiom) -> str:
    if isinstance(ax, ConceptIncl):
        return f"{_print_concept(ax.lhs)} -> {_print_concept(ax.rhs)}"
    if isinstance(ax, ConceptDisj):
        return f"{_print_concept(ax.first)}, {_print_concept(ax.second)} -> false"
    if isinstance(ax, RoleIncl):
        return f"{_print_role(ax.lhs)} -> {_print_role(ax.rhs)}"
    return f"{_print_role(ax.first)}, {_print_role(ax.second)} -> false"


def print_ontology(t: Ontology) -> str:
    return "".join(print_axiom(ax) + "\n" for ax in t.axioms)


def print_data(a: DataInstance) -> str:
    return "".join(f"{f}.\n" for f in a.sorted_facts())


def print_query(q: ConjunctiveQuery) -> str:
    body = ", ".join(str(a) for a in q.sorted_atoms())
    return f"{q.name}({','.join(q.answer_vars)}) :- {body}\n"
