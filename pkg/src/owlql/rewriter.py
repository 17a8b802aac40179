"""Boolean functions of a query and ontology, and the rewritings compiled from them.

The propositional variables of the witness functions are encoded as strings so
that formulas, circuits and programs from :mod:`owlql.boolprog` can carry them:

* ``p.A.z`` / ``p.R.z.z2``: the query atom ``A(z)`` / ``R(z,z2)`` holds
* ``t.i``: the ``i``-th tree witness is realised
* ``e.z.z2``: ``z`` and ``z2`` go to the same individual
* ``g.z.R`` (``g.z.R-``): ``z`` goes to an individual with an ``R`` (``R-``) successor

Rewritings are only correct for consistent data; the executor checks consistency
first.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from itertools import combinations, product
from typing import Iterable, Mapping, Union

from . import boolprog as bp
from . import canonical, reasoner, witnesses
from .reasoner import OMEGA
from .syntax import (
    Atom,
    AtomicConcept,
    ConjunctiveQuery,
    DataInstance,
    ExistsRole,
    Ontology,
    Role,
    concept_key,
    natural_key,
)

DEFAULT_LEAF_LIMIT = 4
DEFAULT_WIDTH_LIMIT = 2
TREEWIDTH_VAR_LIMIT = 20


class StrategyError(ValueError):
    """A rewriting strategy was asked for a query or ontology outside its class."""


# propositional variables


@dataclass(frozen=True, order=True)
class TwVariable:
    kind: str  # "atom", "witness", "eq", "gen"
    args: tuple

    @classmethod
    def atom(cls, a: Atom) -> "TwVariable":
        return cls("atom", (a.pred,) + tuple(a.args))

    @classmethod
    def witness(cls, i: int) -> "TwVariable":
        return cls("witness", (i,))

    @classmethod
    def eq(cls, z: str, z2: str) -> "TwVariable":
        return cls("eq", tuple(sorted((z, z2), key=natural_key)))

    @classmethod
    def gen(cls, z: str, role: Role) -> "TwVariable":
        return cls("gen", (z, role))

    @property
    def name(self) -> str:
        if self.kind == "atom":
            return "p." + ".".join(self.args)
        if self.kind == "witness":
            return f"t.{self.args[0]}"
        if self.kind == "eq":
            return "e." + ".".join(self.args)
        return f"g.{self.args[0]}.{self.args[1]}"

    @property
    def as_atom(self) -> Atom:
        return Atom(self.args[0], tuple(self.args[1:]))

    def __str__(self) -> str:
        return self.name


def parse_variable(name: str) -> TwVariable:
    kind, _, rest = name.partition(".")
    parts = rest.split(".")
    try:
        if kind == "p" and len(parts) in (2, 3):
            return TwVariable("atom", tuple(parts))
        if kind == "t" and len(parts) == 1:
            return TwVariable.witness(int(parts[0]))
        if kind == "e" and len(parts) == 2:
            return TwVariable.eq(*parts)
        if kind == "g" and len(parts) == 2:
            return TwVariable.gen(parts[0], Role.parse(parts[1]))
    except ValueError:
        pass
    raise bp.ProgramError(f"{name!r} is not a witness-function variable")


# positive existential queries


@dataclass(frozen=True)
class PeAtom:
    pred: str
    args: tuple

    @property
    def size(self) -> int:
        return 1 + len(self.args)


@dataclass(frozen=True)
class PeEq:
    left: str
    right: str

    @property
    def size(self) -> int:
        return 3


@dataclass(frozen=True)
class PeAnd:
    children: tuple

    @property
    def size(self) -> int:
        return 1 + sum(c.size for c in self.children)


@dataclass(frozen=True)
class PeOr:
    children: tuple

    @property
    def size(self) -> int:
        return 1 + sum(c.size for c in self.children)


@dataclass(frozen=True)
class PeExists:
    vars: tuple
    child: "PeNode"

    @property
    def size(self) -> int:
        return 1 + len(self.vars) + self.child.size


PeNode = Union[PeAtom, PeEq, PeAnd, PeOr, PeExists]
PE_TRUE = PeAnd(())
PE_FALSE = PeOr(())


def free_vars(node: PeNode) -> frozenset:
    if isinstance(node, PeAtom):
        return frozenset(node.args)
    if isinstance(node, PeEq):
        return frozenset((node.left, node.right))
    if isinstance(node, PeExists):
        return free_vars(node.child) - set(node.vars)
    out = frozenset()
    for c in node.children:
        out |= free_vars(c)
    return out


def pe_and(parts: Iterable[PeNode]) -> PeNode:
    flat = []
    for p in parts:
        if isinstance(p, PeAnd):
            flat.extend(p.children)
        else:
            flat.append(p)
    if any(p == PE_FALSE for p in flat):
        return PE_FALSE
    flat = list(dict.fromkeys(flat))
    return flat[0] if len(flat) == 1 else PeAnd(tuple(flat))


def pe_or(parts: Iterable[PeNode]) -> PeNode:
    flat = []
    for p in parts:
        if isinstance(p, PeOr):
            flat.extend(p.children)
        else:
            flat.append(p)
    if any(p == PE_TRUE for p in flat):
        return PE_TRUE
    flat = list(dict.fromkeys(flat))
    return flat[0] if len(flat) == 1 else PeOr(tuple(flat))


def pe_exists(vs: Iterable[str], child: PeNode) -> PeNode:
    """Quantify only the variables that actually occur free in ``child``."""
    fv = free_vars(child)
    keep = tuple(sorted({v for v in vs if v in fv}, key=natural_key))
    return PeExists(keep, child) if keep else child


def pe_to_text(node: PeNode) -> str:
    if isinstance(node, PeAtom):
        return f"{node.pred}({','.join(node.args)})"
    if isinstance(node, PeEq):
        return f"{node.left} = {node.right}"
    if isinstance(node, PeExists):
        return f"exists {','.join(node.vars)} . ({pe_to_text(node.child)})"
    if not node.children:
        return "true" if isinstance(node, PeAnd) else "false"
    op = "and" if isinstance(node, PeAnd) else "or"
    return f"{op}({', '.join(pe_to_text(c) for c in node.children)})"


@dataclass(frozen=True)
class PeQuery:
    answer_vars: tuple
    body: PeNode
    name: str = "q"

    @property
    def size(self) -> int:
        return len(self.answer_vars) + self.body.size

    def __str__(self) -> str:
        return f"{self.name}({','.join(self.answer_vars)}) :- {pe_to_text(self.body)}"


class _PeParser:
    def __init__(self, text: str):
        import re

        self.tokens = re.findall(r"[A-Za-z_][A-Za-z0-9_']*|:-|[(),.=]", text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def take(self, expect=None):
        tok = self.peek()
        if tok is None or (expect is not None and tok != expect):
            raise ValueError(f"expected {expect or 'a token'}, found {tok!r}")
        self.i += 1
        return tok

    def names(self, stop: str) -> tuple:
        out = []
        while self.peek() != stop:
            out.append(self.take())
            if self.peek() == ",":
                self.take(",")
        return tuple(out)

    def node(self) -> PeNode:
        tok = self.take()
        if tok == "exists":
            vs = self.names(".")
            self.take(".")
            self.take("(")
            child = self.node()
            self.take(")")
            return PeExists(vs, child)
        if tok in ("true", "false") and self.peek() != "(":
            return PE_TRUE if tok == "true" else PE_FALSE
        if tok in ("and", "or") and self.peek() == "(":
            self.take("(")
            kids = []
            while self.peek() != ")":
                kids.append(self.node())
                if self.peek() == ",":
                    self.take(",")
            self.take(")")
            return (PeAnd if tok == "and" else PeOr)(tuple(kids))
        if self.peek() == "=":
            self.take("=")
            return PeEq(tok, self.take())
        self.take("(")
        args = self.names(")")
        self.take(")")
        return PeAtom(tok, args)


def parse_pe(text: str) -> PeQuery:
    """Inverse of ``str(PeQuery)``."""
    p = _PeParser(text)
    name = p.take()
    p.take("(")
    avars = p.names(")")
    p.take(")")
    p.take(":-")
    body = p.node()
    if p.peek() is not None:
        raise ValueError(f"trailing input at {p.peek()!r}")
    return PeQuery(avars, body, name)


# non-recursive datalog


@dataclass(frozen=True)
class Rule:
    head: Atom
    body: tuple

    def __str__(self) -> str:
        def show(a: Atom) -> str:
            return f"{a.pred}({','.join(_dl_var(v) for v in a.args)})"

        body = ", ".join(show(a) for a in self.body)
        return f"{show(self.head)} :- {body}." if body else f"{show(self.head)}."


def _dl_var(v: str) -> str:
    return v[:1].upper() + v[1:]


@dataclass(frozen=True)
class NdlProgram:
    rules: tuple
    goal: str
    arities: Mapping = field(compare=False)  # every IDB predicate, including rule-less ones

    @cached_property
    def idb(self) -> frozenset:
        return frozenset(self.arities)

    @cached_property
    def edb(self) -> frozenset:
        return frozenset(a.pred for r in self.rules for a in r.body if a.pred not in self.idb)

    @property
    def size(self) -> int:
        return sum(1 + len(r.head.args) + sum(1 + len(a.args) for a in r.body) for r in self.rules)

    def rules_for(self, pred: str) -> list:
        return [r for r in self.rules if r.head.pred == pred]

    def dependencies(self) -> dict:
        deps = {p: set() for p in self.idb}
        for r in self.rules:
            deps[r.head.pred].update(a.pred for a in r.body if a.pred in self.idb)
        return deps

    def strata(self) -> list:
        """IDB predicates in dependency order; raises on recursion."""
        deps = self.dependencies()
        order, state = [], {}

        def visit(p):
            if state.get(p) == 2:
                return
            if state.get(p) == 1:
                raise bp.ProgramError(f"recursion through predicate {p}")
            state[p] = 1
            for d in sorted(deps[p]):
                visit(d)
            state[p] = 2
            order.append(p)

        for p in sorted(self.idb):
            visit(p)
        return order

    def problems(self) -> list:
        out = []
        if self.goal not in self.idb:
            out.append(f"goal predicate {self.goal} has no arity")
        for r in self.rules:
            if r.head.pred not in self.idb:
                out.append(f"rule head {r.head.pred} is not declared")
            elif len(r.head.args) != self.arities[r.head.pred]:
                out.append(f"rule head {r.head} has the wrong arity")
            body_vars = {v for a in r.body for v in a.args}
            missing = set(r.head.args) - body_vars
            if missing:
                out.append(f"unsafe rule {r}: {', '.join(sorted(missing))} not in the body")
            for a in r.body:
                if a.pred in self.idb and len(a.args) != self.arities[a.pred]:
                    out.append(f"body atom {a} has the wrong arity")
        try:
            self.strata()
        except bp.ProgramError as e:
            out.append(str(e))
        return out

    def validate(self) -> "NdlProgram":
        problems = self.problems()
        if problems:
            raise bp.ProgramError("; ".join(problems))
        return self

    def __str__(self) -> str:
        lines = [f"% goal: {self.goal}/{self.arities.get(self.goal, 0)}"]
        lines += [str(r) for r in self.rules]
        return "\n".join(lines) + "\n"


def parse_ndl(text: str) -> NdlProgram:
    """Read the text printed by ``str(NdlProgram)``; arguments are variables."""
    import re

    goal = None
    rules = []
    arities = {}
    atom_re = re.compile(r"\s*([A-Za-z_][A-Za-z0-9_']*)\s*\(([^()]*)\)\s*")
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("%"):
            m = re.match(r"%\s*goal:\s*(\S+)/(\d+)", line)
            if m:
                goal = m.group(1)
                arities[goal] = int(m.group(2))
            continue
        if not line.endswith("."):
            raise ValueError(f"rule without final dot: {line!r}")
        head_text, _, body_text = line[:-1].partition(":-")
        atoms = []
        for part in [head_text] + ([body_text] if body_text.strip() else []):
            pos = 0
            part = part.strip()
            while pos < len(part):
                m = atom_re.match(part, pos)
                if not m:
                    raise ValueError(f"cannot parse atom in {line!r}")
                args = tuple(a.strip() for a in m.group(2).split(",") if a.strip())
                atoms.append(Atom(m.group(1), args))
                pos = m.end()
                if pos < len(part) and part[pos] == ",":
                    pos += 1
        head, body = atoms[0], tuple(atoms[1:])
        arities[head.pred] = len(head.args)
        rules.append(Rule(head, body))
    if goal is None:
        raise ValueError("missing '% goal: name/arity' line")
    return NdlProgram(tuple(rules), goal, arities)


# atom rewritings


@dataclass(frozen=True)
class Disjunct:
    """One way of deriving an atom: data atoms plus locally quantified variables."""

    atoms: tuple
    fresh: tuple = ()

    def to_pe(self) -> PeNode:
        body = pe_and(PeAtom(a.pred, a.args) for a in self.atoms)
        return PeExists(self.fresh, body) if self.fresh else body


def _role_atom(r: Role, u: str, v: str) -> Atom:
    return Atom(r.name, (v, u) if r.inverted else (u, v))


def concept_disjuncts(tbox: Ontology, concept, u: str, fresh: str) -> list:
    """Data atoms that entail ``concept(u)``; ``fresh`` names the witness of an existential."""
    idx = reasoner.index(tbox)
    out = []
    for c in sorted(idx.sub_concepts(concept), key=concept_key):
        if isinstance(c, AtomicConcept):
            out.append(Disjunct((Atom(c.name, (u,)),)))
        else:
            out.append(Disjunct((_role_atom(c.role, u, fresh),), (fresh,)))
    return out


def atom_disjuncts(tbox: Ontology, atom: Atom, fresh: str) -> list:
    idx = reasoner.index(tbox)
    if atom.is_unary:
        return concept_disjuncts(tbox, AtomicConcept(atom.pred), atom.args[0], fresh)
    u, v = atom.args
    return [Disjunct((_role_atom(r, u, v),)) for r in sorted(idx.sub_roles(Role(atom.pred)))]


def generator_disjuncts(tbox: Ontology, role: Role, z: str, fresh: str) -> list:
    """Data atoms that entail ``exists y. role(z, y)``."""
    return concept_disjuncts(tbox, ExistsRole(role), z, fresh)


def _fresh_name(taken: Iterable[str], base: str = "w") -> str:
    taken = set(taken)
    if base not in taken:
        return base
    i = 1
    while f"{base}{i}" in taken:
        i += 1
    return f"{base}{i}"


def atom_rewriting(tbox: Ontology, atom: Atom) -> PeNode:
    """Disjunction of every data atom (or existential) that entails ``atom``."""
    fresh = _fresh_name(atom.args)
    return pe_or(d.to_pe() for d in atom_disjuncts(tbox, atom, fresh))


# witness functions


@dataclass
class TwContext:
    """Everything the witness functions of one (query, ontology) pair need."""

    q: ConjunctiveQuery
    tbox: Ontology
    cap: int = witnesses.DEFAULT_CAP

    @cached_property
    def witnesses(self) -> list:
        return witnesses.enumerate_tree_witnesses(self.q, self.tbox, self.cap)

    @cached_property
    def independent(self) -> list:
        return witnesses.independent_subsets(self.witnesses, self.cap)

    @cached_property
    def fresh(self) -> str:
        return _fresh_name(self.q.variables)

    def covered(self, theta: Iterable[int]) -> frozenset:
        out = frozenset()
        for i in theta:
            out |= self.witnesses[i].atoms
        return out


@lru_cache(maxsize=128)
def context(q: ConjunctiveQuery, tbox: Ontology) -> TwContext:
    return TwContext(q, tbox)


def _atom_var(a: Atom) -> bp.Var:
    return bp.Var(TwVariable.atom(a).name)


def witness_equalities(t: witnesses.TreeWitness) -> list:
    """Variable pairs joined by a binary atom of the witness."""
    pairs = {
        tuple(sorted(set(a.args), key=natural_key))
        for a in t.atoms
        if len(set(a.args)) == 2
    }
    return sorted(pairs, key=lambda p: (natural_key(p[0]), natural_key(p[1])))


def f_tw(q: ConjunctiveQuery, tbox: Ontology) -> bp.Formula:
    """Disjunction over independent witness sets of the uncovered atoms and the witnesses."""
    ctx = context(q, tbox)
    atoms = q.sorted_atoms()
    disjuncts = []
    for theta in ctx.independent:
        covered = ctx.covered(theta)
        parts = [_atom_var(a) for a in atoms if a not in covered]
        parts += [bp.Var(TwVariable.witness(i).name) for i in theta]
        disjuncts.append(bp.And(tuple(parts)))
    return bp.Or(tuple(disjuncts))


def witness_gen_formula(t: witnesses.TreeWitness) -> bp.Formula:
    """Equalities inside the witness and, for some generator, a successor at every variable."""
    eqs = [bp.Var(TwVariable.eq(z, z2).name) for z, z2 in witness_equalities(t)]
    vs = sorted(t.variables, key=natural_key)
    gens = bp.Or(
        tuple(
            bp.And(tuple(bp.Var(TwVariable.gen(z, r).name) for z in vs))
            for r in sorted(t.generators)
        )
    )
    return bp.And(tuple(eqs) + (gens,))


def f_tw_prime(q: ConjunctiveQuery, tbox: Ontology) -> bp.Formula:
    """Like :func:`f_tw` with each witness variable spelled out by equality and generator variables."""
    ctx = context(q, tbox)
    atoms = q.sorted_atoms()
    disjuncts = []
    for theta in ctx.independent:
        covered = ctx.covered(theta)
        parts = [_atom_var(a) for a in atoms if a not in covered]
        parts += [witness_gen_formula(ctx.witnesses[i]) for i in theta]
        disjuncts.append(bp.And(tuple(parts)))
    return bp.Or(tuple(disjuncts))


def f_prim(q: ConjunctiveQuery, tbox: Ontology, gamma: Mapping) -> bool:
    """Does the one-individual data instance chosen by ``gamma`` entail ``q(a,...,a)``?"""
    arity = {}
    for a in q.atoms:
        arity[a.pred] = len(a.args)
    for name in tbox.concept_names:
        arity[name] = 1
    for name in tbox.role_names:
        arity[name] = 2
    facts = [
        Atom(p, ("a",) * arity.get(p, 1))
        for p, bit in sorted(gamma.items())
        if bit and arity.get(p, 1) in (1, 2)
    ]
    abox = DataInstance(facts)
    if not facts:
        return False
    return ("a",) * len(q.answer_vars) in canonical.certain_answers_brute(tbox, abox, q)


def prim_predicates(q: ConjunctiveQuery, tbox: Ontology) -> list:
    return sorted(q.signature | tbox.signature, key=natural_key)


# substitution into PE


def _witness_pe(ctx: TwContext, t: witnesses.TreeWitness) -> PeNode:
    """Some generator of ``t`` has a successor at one individual shared by all roots."""
    roots = sorted(t.roots, key=natural_key)
    z = roots[0] if roots else _fresh_name(ctx.q.variables, "r")
    eqs = [PeEq(r, z) for r in roots[1:]]
    disj = []
    for role in sorted(t.generators):
        rho = pe_or(d.to_pe() for d in generator_disjuncts(ctx.tbox, role, z, ctx.fresh))
        disj.append(pe_and([rho] + eqs))
    body = pe_or(disj)
    return body if roots else pe_exists((z,), body)


def _variable_pe(ctx: TwContext, name: str) -> PeNode:
    v = parse_variable(name)
    if v.kind == "eq":
        return PeEq(*v.args)
    if v.kind == "atom":
        atom = v.as_atom
        if atom not in ctx.q.atoms:
            raise bp.ProgramError(f"{name}: not an atom of the query")
        return pe_or(d.to_pe() for d in atom_disjuncts(ctx.tbox, atom, ctx.fresh))
    if v.kind == "gen":
        z, role = v.args
        if z not in ctx.q.variables:
            raise bp.ProgramError(f"{name}: unknown query variable")
        return pe_or(d.to_pe() for d in generator_disjuncts(ctx.tbox, role, z, ctx.fresh))
    i = v.args[0]
    if not 0 <= i < len(ctx.witnesses):
        raise bp.ProgramError(f"{name}: no such tree witness")
    return _witness_pe(ctx, ctx.witnesses[i])


def formula_to_pe(q: ConjunctiveQuery, tbox: Ontology, chi: bp.Formula) -> PeQuery:
    """Replace every variable of ``chi`` by its PE-rewriting and quantify the existentials."""
    ctx = context(q, tbox)
    memo = {}

    def conv(f) -> PeNode:
        if isinstance(f, bp.Var):
            if f.name.startswith("!"):
                raise bp.ProgramError("formula must be monotone")
            if f.name not in memo:
                memo[f.name] = _variable_pe(ctx, f.name)
            return memo[f.name]
        if isinstance(f, bp.Const):
            return PE_TRUE if f.value else PE_FALSE
        parts = [conv(c) for c in f.children]
        return pe_and(parts) if isinstance(f, bp.And) else pe_or(parts)

    return PeQuery(q.answer_vars, pe_exists(q.existential_vars, conv(chi)), q.name)


# circuits to datalog


def _fresh_pred(base: str, taken: set) -> str:
    name = base
    while name in taken:
        name += "_"
    taken.add(name)
    return name


def circuit_to_ndl(q: ConjunctiveQuery, tbox: Ontology, circuit: bp.MonotoneCircuit) -> NdlProgram:
    """One IDB predicate per gate over all query variables, guarded by a domain predicate."""
    ctx = context(q, tbox)
    if not circuit.monotone:
        raise bp.ProgramError("circuit must be monotone")
    arity = {a.pred: len(a.args) for a in q.atoms}
    arity.update({n: 1 for n in tbox.concept_names})
    arity.update({n: 2 for n in tbox.role_names})
    taken = set(arity)
    d0 = _fresh_pred("d0", taken)
    dom = _fresh_pred("dom", taken)
    gate_pred = [_fresh_pred(f"g{i}", taken) for i in range(len(circuit.gates))]
    goal = _fresh_pred("goal", taken)
    zs = tuple(q.variables)
    fresh = _fresh_name(zs)
    rules = []
    for p in sorted(arity, key=natural_key):
        if arity[p] == 1:
            rules.append(Rule(Atom(d0, ("X",)), (Atom(p, ("X",)),)))
        else:
            rules.append(Rule(Atom(d0, ("X",)), (Atom(p, ("X", "Y")),)))
            rules.append(Rule(Atom(d0, ("X",)), (Atom(p, ("Y", "X")),)))
    rules.append(Rule(Atom(dom, zs), tuple(Atom(d0, (z,)) for z in zs)))

    def guarded(head_pred, body, subst=None):
        args = tuple((subst or {}).get(z, z) for z in zs)
        return Rule(Atom(head_pred, args), tuple(body) + (Atom(dom, args),))

    for i, g in enumerate(circuit.gates):
        head = gate_pred[i]
        if g.op == "and":
            rules.append(guarded(head, [Atom(gate_pred[j], zs) for j in g.inputs]))
            continue
        if g.op == "or":
            for j in g.inputs:
                rules.append(guarded(head, [Atom(gate_pred[j], zs)]))
            continue
        v = parse_variable(g.var)
        if v.kind == "eq":
            z, z2 = v.args
            rules.append(guarded(head, [], {z2: z}))
        elif v.kind == "atom":
            if v.as_atom not in q.atoms:
                raise bp.ProgramError(f"{g.var}: not an atom of the query")
            for d in atom_disjuncts(tbox, v.as_atom, fresh):
                rules.append(guarded(head, d.atoms))
        elif v.kind == "gen":
            z, role = v.args
            for d in generator_disjuncts(tbox, role, z, fresh):
                rules.append(guarded(head, d.atoms))
        else:
            t = ctx.witnesses[v.args[0]]
            roots = sorted(t.roots, key=natural_key)
            z = roots[0] if roots else _fresh_name(set(zs) | {fresh}, "r")
            subst = {r: z for r in roots}
            for role in sorted(t.generators):
                for d in generator_disjuncts(tbox, role, z, fresh):
                    rules.append(guarded(head, d.atoms, subst))
    rules.append(Rule(Atom(goal, tuple(q.answer_vars)), (Atom(gate_pred[circuit.output], zs),)))
    arities = {d0: 1, dom: len(zs), goal: len(q.answer_vars)}
    arities.update({p: len(zs) for p in gate_pred})
    return NdlProgram(tuple(rules), goal, arities).validate()


# rewritings as Boolean functions of the predicates


def pe_to_boolfn(node) -> bp.Formula:
    """Collapse every term to one constant: atoms become predicate variables."""
    if isinstance(node, PeQuery):
        node = node.body
    if isinstance(node, PeAtom):
        return bp.Var(node.pred)
    if isinstance(node, PeEq):
        return bp.Const(True)
    if isinstance(node, PeExists):
        return pe_to_boolfn(node.child)
    parts = tuple(pe_to_boolfn(c) for c in node.children)
    return bp.And(parts) if isinstance(node, PeAnd) else bp.Or(parts)


def ndl_to_boolfn(prog: NdlProgram) -> bp.MonotoneCircuit:
    b = bp.CircuitBuilder()
    gate = {}
    for p in prog.strata():
        bodies = []
        for r in prog.rules_for(p):
            bodies.append(b.and_(gate[a.pred] if a.pred in prog.idb else b.input(a.pred) for a in r.body))
        gate[p] = b.or_(bodies)
    return b.build(gate[prog.goal])


def rewriting_to_boolfn(r):
    if isinstance(r, (PeQuery, PeAtom, PeEq, PeAnd, PeOr, PeExists)):
        return pe_to_boolfn(r)
    if isinstance(r, NdlProgram):
        return ndl_to_boolfn(r)
    raise TypeError(f"not a rewriting: {type(r).__name__}")


# query shape and tree decompositions


def _graph_of(q: ConjunctiveQuery) -> dict:
    return {v: set(ns) for v, ns in q.graph.items()}


def _is_forest(graph: dict) -> bool:
    edges = sum(len(ns) for ns in graph.values()) // 2
    comps = len(_components(graph))
    return edges == len(graph) - comps


def _components(graph: dict) -> list:
    seen, out = set(), []
    for v in graph:
        if v in seen:
            continue
        comp, todo = [], [v]
        seen.add(v)
        while todo:
            u = todo.pop()
            comp.append(u)
            for w in graph[u]:
                if w not in seen:
                    seen.add(w)
                    todo.append(w)
        out.append(comp)
    return out


@dataclass(frozen=True)
class QueryShape:
    tree_shaped: bool
    leaf_count: int
    linear: bool
    connected: bool

    def as_dict(self) -> dict:
        return {
            "treeShaped": self.tree_shaped,
            "leafCount": self.leaf_count,
            "linear": self.linear,
            "connected": self.connected,
        }


def leaves(q: ConjunctiveQuery) -> list:
    """Vertices of degree at most one, in variable order."""
    return [v for v in q.variables if len(q.graph[v]) <= 1]


def query_shape(q: ConjunctiveQuery) -> QueryShape:
    graph = _graph_of(q)
    tree = _is_forest(graph)
    connected = len(_components(graph)) == 1
    n_leaves = len(leaves(q))
    return QueryShape(tree, n_leaves, tree and connected and n_leaves <= 2, connected)


@dataclass(frozen=True)
class TreeDecomposition:
    bags: tuple  # frozensets of variables
    edges: tuple  # pairs of bag indices

    @property
    def width(self) -> int:
        return max((len(b) for b in self.bags), default=0) - 1

    def neighbours(self) -> dict:
        adj = {i: [] for i in range(len(self.bags))}
        for i, j in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        return adj

    def problems(self, graph: Mapping) -> list:
        """Violations of the three decomposition conditions plus tree shape."""
        out = []
        n = len(self.bags)
        adj = self.neighbours()
        if n and (len(self.edges) != n - 1 or len(_components({i: set(adj[i]) for i in range(n)})) != 1):
            out.append("bags do not form a tree")
        covered = set().union(*self.bags) if self.bags else set()
        for v in graph:
            if v not in covered:
                out.append(f"vertex {v} is in no bag")
        for v, ns in graph.items():
            for w in ns:
                if not any(v in b and w in b for b in self.bags):
                    out.append(f"edge {v}-{w} is in no bag")
        for v in covered:
            nodes = {i for i, b in enumerate(self.bags) if v in b}
            sub = {i: {j for j in adj[i] if j in nodes} for i in nodes}
            if len(_components(sub)) != 1:
                out.append(f"bags containing {v} are not connected")
        return sorted(set(out))


def _treewidth_order(graph: Mapping, limit: int) -> tuple:
    """Exact treewidth and an optimal elimination order by memoized subset search."""
    vs = sorted(graph, key=natural_key)
    n = len(vs)
    if n > limit:
        raise StrategyError(f"exact treewidth limited to {limit} variables, query has {n}")
    bit = {v: 1 << i for i, v in enumerate(vs)}
    nbr = [sum(bit[w] for w in graph[v]) for v in vs]

    def q_size(s: int, i: int) -> int:
        # vertices outside s | {i} reachable from i through s
        seen = (1 << i)
        frontier = nbr[i]
        found = 0
        while frontier:
            j = (frontier & -frontier).bit_length() - 1
            frontier &= frontier - 1
            if seen >> j & 1:
                continue
            seen |= 1 << j
            if s >> j & 1:
                frontier |= nbr[j] & ~seen
            else:
                found += 1
        return found

    memo = {0: (-1, None)}

    def tw(s: int) -> int:
        if s in memo:
            return memo[s][0]
        best, arg = math.inf, None
        x = s
        while x:
            i = (x & -x).bit_length() - 1
            x &= x - 1
            rest = s & ~(1 << i)
            val = max(q_size(rest, i), -1)
            if val >= best:
                continue
            val = max(val, tw(rest))
            if val < best:
                best, arg = val, i
        memo[s] = (best, arg)
        return best

    full = (1 << n) - 1
    width = max(tw(full), 0) if n else 0
    order = []
    s = full
    while s:
        i = memo[s][1]
        order.append(vs[i])
        s &= ~(1 << i)
    order.reverse()
    return width, order


def decomposition_from_order(graph: Mapping, order: list) -> TreeDecomposition:
    adj = {v: set(ns) for v, ns in graph.items()}
    pos = {v: i for i, v in enumerate(order)}
    bags, parent_of = [], []
    for v in order:
        ns = adj[v]
        bags.append(frozenset(ns | {v}))
        parent_of.append(min(ns, key=pos.__getitem__) if ns else None)
        for a in ns:
            adj[a] |= ns - {a}
            adj[a].discard(v)
        del adj[v]
    edges = []
    for i, p in enumerate(parent_of):
        if p is not None:
            edges.append((i, pos[p]))
        elif i + 1 < len(order):
            edges.append((i, len(order) - 1))
    return _compress(TreeDecomposition(tuple(bags), tuple(edges)))


def _compress(td: TreeDecomposition) -> TreeDecomposition:
    """Merge every bag that is contained in a neighbouring bag."""
    bags = dict(enumerate(td.bags))
    adj = {i: set() for i in bags}
    for i, j in td.edges:
        adj[i].add(j)
        adj[j].add(i)
    changed = True
    while changed:
        changed = False
        for i in sorted(bags):
            for j in sorted(adj[i]):
                if bags[i] <= bags[j]:
                    for k in adj[i] - {j}:
                        adj[k].discard(i)
                        adj[k].add(j)
                        adj[j].add(k)
                    adj[j].discard(i)
                    del adj[i], bags[i]
                    changed = True
                    break
            if changed:
                break
    keys = sorted(bags)
    renum = {k: n for n, k in enumerate(keys)}
    edges = sorted({tuple(sorted((renum[i], renum[j]))) for i in adj for j in adj[i]})
    return TreeDecomposition(tuple(bags[k] for k in keys), tuple(edges))


def graph_decomposition(graph: Mapping, limit: int = TREEWIDTH_VAR_LIMIT) -> tuple:
    if not graph:
        return 0, TreeDecomposition((frozenset(),), ())
    width, order = _treewidth_order(graph, limit)
    td = decomposition_from_order(graph, order)
    return width, td


def treewidth_and_decomposition(q: ConjunctiveQuery, limit: int = TREEWIDTH_VAR_LIMIT) -> tuple:
    """Exact treewidth of the query graph and a decomposition of that width."""
    return graph_decomposition(_graph_of(q), limit)


def centroid(td: TreeDecomposition) -> int:
    """Bag whose removal leaves components of at most half the bags."""
    adj = td.neighbours()
    n = len(td.bags)
    best, arg = math.inf, 0
    for v in range(n):
        biggest = 0
        for start in adj[v]:
            seen, todo = {v, start}, [start]
            while todo:
                for w in adj[todo.pop()]:
                    if w not in seen:
                        seen.add(w)
                        todo.append(w)
            biggest = max(biggest, len(seen) - 1)
        if biggest < best:
            best, arg = biggest, v
    return arg


# bounded-leaf queries: branching programs over flat witness sets


class _RootedForest:
    """The query graph rooted at one leaf per component, below a virtual root.

    Edges are named by their lower endpoint; the virtual edge into a component
    root is named by that root.
    """

    def __init__(self, q: ConjunctiveQuery):
        graph = q.graph
        order = {v: i for i, v in enumerate(q.variables)}
        self.parent = {}
        self.roots = []
        for comp in _components({v: set(graph[v]) for v in q.variables}):
            comp.sort(key=order.__getitem__)
            root = next(v for v in comp if len(graph[v]) <= 1)
            self.roots.append(root)
            self.parent[root] = None
            todo = [root]
            while todo:
                u = todo.pop()
                for w in sorted(graph[u], key=order.__getitem__):
                    if w not in self.parent:
                        self.parent[w] = u
                        todo.append(w)
        self.path = {}
        for v in q.variables:
            p, x = [], v
            while x is not None:
                p.append(x)
                x = self.parent[x]
            self.path[v] = frozenset(p)

    def edge_of(self, u: str, v: str) -> str:
        return v if self.parent.get(v) == u else u

    def atom_path(self, a: Atom) -> frozenset:
        if len(set(a.args)) == 1:
            return self.path[a.args[0]]
        return self.path[self.edge_of(*a.args)]


def _witness_edges(forest: _RootedForest, t: witnesses.TreeWitness) -> frozenset:
    out = {forest.edge_of(*a.args) for a in t.atoms if len(set(a.args)) == 2}
    out |= {r for r in forest.roots if r in t.interior}
    return frozenset(out)


def bounded_leaf_nbp(q: ConjunctiveQuery, tbox: Ontology) -> bp.Nbp:
    """Branching program over flat independent witness sets that computes f_tw."""
    if not query_shape(q).tree_shaped:
        raise StrategyError("bounded-leaf strategy needs a tree-shaped query")
    ctx = context(q, tbox)
    ws = ctx.witnesses
    forest = _RootedForest(q)
    edges = [_witness_edges(forest, t) for t in ws]
    def ancestor_related(i, j) -> bool:
        return any(forest.path[b] & edges[i] for b in edges[j]) or any(
            forest.path[a] & edges[j] for a in edges[i]
        )

    n = len(ws)
    ok_pair = [
        [i != j and not (ws[i].atoms & ws[j].atoms) and not ancestor_related(i, j) for j in range(n)]
        for i in range(n)
    ]
    flats = []

    def grow(start, chosen):
        flats.append(tuple(chosen))
        for i in range(start, n):
            if all(ok_pair[i][j] for j in chosen):
                chosen.append(i)
                grow(i + 1, chosen)
                chosen.pop()

    grow(0, [])
    if len(flats) > ctx.cap:
        raise witnesses.WitnessOverflow(f"more than {ctx.cap} flat witness sets")
    atoms = q.sorted_atoms()
    info = []
    for theta in flats:
        e = frozenset().union(*(edges[i] for i in theta)) if theta else frozenset()
        covered = ctx.covered(theta)
        verts = frozenset().union(*(ws[i].variables for i in theta)) if theta else frozenset()
        after = frozenset(a for a in atoms if a not in covered and forest.atom_path(a) & e)
        before = frozenset(a for a in atoms if a not in covered and a not in after)
        past = frozenset(v for v in q.variables if forest.path[v] & e)
        info.append((e, covered, verts, before, after, past))

    def conj(atom_set) -> bp.Label:
        return bp.Label.conj(TwVariable.atom(a).name for a in atom_set)

    vertices = ["s"]
    nbp_edges = []
    for k, theta in enumerate(flats):
        vertices += [f"u{k}", f"v{k}"]
        _, covered, _, before, after, _ = info[k]
        nbp_edges.append(("s", f"u{k}", conj(before)))
        nbp_edges.append(
            (f"u{k}", f"v{k}", bp.Label.conj(TwVariable.witness(i).name for i in theta))
        )
        nbp_edges.append((f"v{k}", "t", conj(after)))
    for k, a in enumerate(info):
        for m, b in enumerate(info):
            if k == m or not flats[m]:
                continue
            # every root path into the later set passes through the earlier one
            if b[2] <= a[5] and not (a[1] & b[1]):
                between = (a[4] & b[3]) - b[1]
                nbp_edges.append((f"v{k}", f"u{m}", conj(between)))
    vertices.append("t")
    return bp.Nbp(tuple(vertices), tuple(nbp_edges), "s", "t")


# bounded treewidth: tree hypergraph programs over word tuples


def realizable_words(tbox: Ontology, depth: int) -> list:
    """The empty word plus every word of a generator model up to ``depth`` letters."""
    idx = reasoner.index(tbox)
    out = [()]
    layer = [(r,) for r in sorted(idx.generatable_roles)]
    while layer and len(layer[0]) <= depth:
        out += layer
        layer = [w + (s,) for w in layer for s in idx.successors(w[-1])]
    return out


def _node_assignments(q, tbox, bag, words) -> list:
    """All word assignments to the bag's variables compatible with the query atoms inside it."""
    idx = reasoner.index(tbox)
    vs = sorted(bag, key=natural_key)
    answer = set(q.answer_vars)
    inside = [a for a in q.atoms if set(a.args) <= bag]

    def atom_ok(a, w) -> bool:
        if a.is_unary:
            word = w[a.args[0]]
            return not word or AtomicConcept(a.pred) in idx.concepts_of_anonymous(word[-1])
        w1, w2 = w[a.args[0]], w[a.args[1]]
        r = Role(a.pred)
        if not w1 and not w2:
            return True
        if len(w2) == len(w1) + 1 and w2[:-1] == w1:
            return idx.entails_role(w2[-1], r)
        if len(w1) == len(w2) + 1 and w1[:-1] == w2:
            return idx.entails_role(w1[-1], r.inv)
        return False

    out = []

    def rec(i, w):
        if i == len(vs):
            out.append(dict(w))
            return
        v = vs[i]
        for word in words:
            if word and v in answer:
                continue
            w[v] = word
            if all(atom_ok(a, w) for a in inside if vs[i] in a.args and set(a.args) <= set(vs[: i + 1])):
                rec(i + 1, w)
            del w[v]

    rec(0, {})
    return out


def _node_label(q, bag, w) -> bp.Label:
    lits = []
    for a in q.atoms:
        if not set(a.args) <= bag:
            continue
        ws = [w[z] for z in a.args]
        if not any(ws):
            lits.append(TwVariable.atom(a).name)
            continue
        role = next(word[0] for word in ws if word)
        distinct = sorted(set(a.args), key=natural_key)
        lits += [TwVariable.gen(z, role).name for z in distinct]
        if len(distinct) == 2:
            lits.append(TwVariable.eq(*distinct).name)
    return bp.Label.conj(lits)


@dataclass(frozen=True)
class BtwProgram:
    program: bp.HypergraphProgram
    decomposition: TreeDecomposition
    words: int  # |W_d|
    tuples: int  # M, word tuples over the widest bag
    nodes_bound: int  # L = (2|q| - 1)^2

    @property
    def vertex_bound(self) -> int:
        return (2 * self.tuples + 1) * self.nodes_bound

    @property
    def hyperedge_bound(self) -> int:
        return self.nodes_bound * (self.tuples + self.tuples ** 2)


def btw_thgp(
    q: ConjunctiveQuery,
    tbox: Ontology,
    width_limit: int | None = None,
    decomposition: TreeDecomposition | None = None,
) -> BtwProgram:
    """Tree hypergraph program over word tuples of decomposition bags; computes f_tw'."""
    d = reasoner.ontology_depth(tbox)
    if d == OMEGA:
        raise StrategyError("bounded-treewidth strategy needs an ontology of finite depth")
    if decomposition is None:
        _, decomposition = treewidth_and_decomposition(q)
    problems = decomposition.problems(q.graph)
    if problems:
        raise StrategyError("invalid tree decomposition: " + "; ".join(problems))
    if width_limit is not None and decomposition.width > width_limit:
        raise StrategyError(
            f"query treewidth {decomposition.width} exceeds the limit {width_limit}"
        )
    words = realizable_words(tbox, d)
    bags = list(decomposition.bags)
    assigns = [_node_assignments(q, tbox, b, words) for b in bags]
    labels_of = [[_node_label(q, b, w) for w in ws] for b, ws in zip(bags, assigns)]
    widest = max(len(b) for b in bags)
    m_total = len(words) ** widest
    n_bound = (2 * len(q.atoms) - 1) ** 2

    tree_vertices, tree_edges, names, labels, hyper = [], [], [], [], []

    def edge(a, b, lab):
        tree_edges.append((a, b))
        names.append(f"{a}-{b}")
        labels.append(lab)
        return len(names) - 1

    for i in range(len(bags)):
        tree_vertices.append(f"N{i}")
    adj = decomposition.neighbours()
    if len(bags) == 1:
        # one bag: a single chain N0 - u1 - v1 - ... - uM - vM
        chain = []
        prev = "N0"
        for k, lab in enumerate(labels_of[0]):
            u, v = f"u0.{k}", f"v0.{k}"
            tree_vertices += [u, v]
            zero = edge(prev, u, bp.ZERO)
            mid = edge(u, v, lab)
            chain.append((zero, mid))
            prev = v
        for k in range(len(chain)):
            left = {names[chain[j][0]] for j in range(k + 1)} | {names[chain[j][1]] for j in range(k)}
            hyper.append(frozenset(left))
            right = {names[chain[j][0]] for j in range(k + 1, len(chain))}
            right |= {names[chain[j][1]] for j in range(k + 1, len(chain))}
            if right:
                hyper.append(frozenset(right))
    else:
        # half-chains: side[i][j] lists (zero edge, labelled edge) from N_i towards N_j
        side = {}
        for i, j in decomposition.edges:
            for a, b in ((i, j), (j, i)):
                prev = f"N{a}"
                seg = []
                for k, lab in enumerate(labels_of[a]):
                    u, v = f"u{a}.{b}.{k}", f"v{a}.{b}.{k}"
                    tree_vertices += [u, v]
                    seg.append((edge(prev, u, bp.ZERO), edge(u, v, lab)))
                    prev = v
                side[a, b] = seg
            mid = edge(f"v{i}.{j}.{len(labels_of[i]) - 1}", f"v{j}.{i}.{len(labels_of[j]) - 1}", bp.ZERO)
            side[i, j, "mid"] = mid
        for i in range(len(bags)):
            for k in range(len(assigns[i])):
                span = set()
                for j in adj[i]:
                    seg = side[i, j]
                    span |= {names[seg[x][0]] for x in range(k + 1)}
                    span |= {names[seg[x][1]] for x in range(k)}
                hyper.append(frozenset(span))
        for i, j in decomposition.edges:
            shared = bags[i] & bags[j]
            si, sj = side[i, j], side[j, i]
            for k, wi in enumerate(assigns[i]):
                for m, wj in enumerate(assigns[j]):
                    if any(wi[z] != wj[z] for z in shared):
                        continue
                    span = {names[side[i, j, "mid"]]}
                    span |= {names[si[x][0]] for x in range(k + 1, len(si))}
                    span |= {names[si[x][1]] for x in range(k + 1, len(si))}
                    span |= {names[sj[x][0]] for x in range(m + 1, len(sj))}
                    span |= {names[sj[x][1]] for x in range(m + 1, len(sj))}
                    hyper.append(frozenset(span))
    sk = bp.Skeleton(tuple(tree_vertices), tuple(tree_edges))
    prog = bp.HypergraphProgram(tuple(names), tuple(hyper), tuple(labels), sk)
    return BtwProgram(prog, decomposition, len(words), m_total, n_bound)


# depth-one ontologies: recursive separator rewriting


def _separator(atoms, evars, width_limit) -> frozenset:
    graph = {v: set() for v in evars}
    for a in atoms:
        u = [v for v in a.args if v in evars]
        if len(set(u)) == 2:
            graph[u[0]].add(u[1])
            graph[u[1]].add(u[0])
    width, td = graph_decomposition(graph)
    if width_limit is not None and width > width_limit:
        raise StrategyError(f"query treewidth {width} exceeds the limit {width_limit}")
    return td.bags[centroid(td)]


def rewrite_pe_depth1(
    q: ConjunctiveQuery, tbox: Ontology, width_limit: int | None = DEFAULT_WIDTH_LIMIT
) -> PeQuery:
    """Split on a central bag, guess which of its variables are anonymous, recurse on the rest."""
    d = reasoner.ontology_depth(tbox)
    if d == OMEGA or d > 1:
        raise StrategyError(f"depth-one strategy needs ontology depth at most 1, got {reasoner.format_depth(d)}")
    ctx = context(q, tbox)
    by_interior = {}
    for t in ctx.witnesses:
        (z,) = t.interior
        by_interior[z] = t

    def rho(a: Atom) -> PeNode:
        return pe_or(x.to_pe() for x in atom_disjuncts(tbox, a, ctx.fresh))

    def dagger(atoms: frozenset, avars: frozenset) -> PeNode:
        allvars = {v for a in atoms for v in a.args}
        evars = allvars - avars
        if not evars:
            return pe_and(rho(a) for a in sorted(atoms))
        sep = _separator(atoms, evars, width_limit)
        cands = [
            by_interior[z]
            for z in sorted(sep, key=natural_key)
            if z in by_interior and by_interior[z].atoms <= atoms
        ]
        disjuncts = []
        for omega in witnesses.independent_subsets(cands, ctx.cap):
            chosen = [cands[i] for i in omega]
            interiors = {next(iter(t.interior)) for t in chosen}
            roots = set().union(*(t.roots for t in chosen)) if chosen else set()
            border = (set(sep) - interiors) | roots
            fixed = set(sep) | border | avars
            covered = frozenset().union(*(t.atoms for t in chosen)) if chosen else frozenset()
            parts = [rho(a) for a in sorted(atoms - covered) if set(a.args) <= fixed]
            parts += [_witness_pe(ctx, t) for t in chosen]
            rest = [a for a in atoms if not set(a.args) <= fixed]
            groups = _split_by_free(rest, fixed)
            sub_avars = frozenset(avars | border)
            for group in groups:
                gvars = {v for a in group for v in a.args}
                parts.append(dagger(frozenset(group), frozenset(sub_avars & gvars)))
            disjuncts.append(pe_exists((set(sep) | roots) - avars, pe_and(parts)))
        return pe_or(disjuncts)

    body = dagger(frozenset(q.atoms), frozenset(q.answer_vars))
    return PeQuery(q.answer_vars, pe_exists(q.existential_vars, body), q.name)


def _split_by_free(atoms: list, fixed: set) -> list:
    """Group atoms whose non-fixed variables are connected avoiding the fixed ones."""
    parent = {}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a in atoms:
        free = [v for v in a.args if v not in fixed]
        for v in free:
            parent.setdefault(v, v)
        for v in free[1:]:
            parent[find(v)] = find(free[0])
    groups = defaultdict(list)
    for a in atoms:
        v = next(v for v in a.args if v not in fixed)
        groups[find(v)].append(a)
    return [sorted(g) for _, g in sorted(groups.items(), key=lambda kv: natural_key(kv[0]))]


# strategies


STRATEGIES = ("auto", "generic", "bounded-leaf", "btw", "depth1")


@dataclass
class Rewriting:
    mode: str  # "pe" or "ndl"
    strategy: str
    program: Union[PeQuery, NdlProgram]
    stats: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return self.program.size


def choose_strategy(
    q: ConjunctiveQuery,
    tbox: Ontology,
    mode: str,
    leaf_limit: int = DEFAULT_LEAF_LIMIT,
    width_limit: int = DEFAULT_WIDTH_LIMIT,
) -> str:
    depth = reasoner.ontology_depth(tbox)
    if mode == "pe":
        if depth != OMEGA and depth <= 1 and _width_at_most(q, width_limit):
            return "depth1"
        return "generic"
    shape = query_shape(q)
    if shape.tree_shaped and shape.leaf_count <= leaf_limit:
        return "bounded-leaf"
    if depth != OMEGA and _width_at_most(q, width_limit):
        return "btw"
    return "generic"


def _width_at_most(q: ConjunctiveQuery, limit: int) -> bool:
    try:
        width, _ = treewidth_and_decomposition(q)
    except StrategyError:
        return False
    return width <= limit


def rewrite(
    q: ConjunctiveQuery,
    tbox: Ontology,
    mode: str = "ndl",
    strategy: str = "auto",
    leaf_limit: int = DEFAULT_LEAF_LIMIT,
    width_limit: int = DEFAULT_WIDTH_LIMIT,
) -> Rewriting:
    if mode not in ("pe", "ndl"):
        raise ValueError(f"unknown mode {mode!r}")
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    if strategy == "auto":
        strategy = choose_strategy(q, tbox, mode, leaf_limit, width_limit)
    stats = {}
    if strategy == "generic":
        f = f_tw(q, tbox)
        stats["formula_size"] = f.size
        if mode == "pe":
            return Rewriting(mode, strategy, formula_to_pe(q, tbox, f), stats)
        c = bp.formula_to_circuit(f)
        stats["circuit_size"] = c.size
        return Rewriting(mode, strategy, circuit_to_ndl(q, tbox, c), stats)
    if strategy == "depth1":
        if mode != "pe":
            raise StrategyError("the depth-one strategy produces PE-rewritings only (use --mode pe)")
        return Rewriting(mode, strategy, rewrite_pe_depth1(q, tbox, width_limit), stats)
    if mode != "ndl":
        raise StrategyError(f"the {strategy} strategy produces NDL-rewritings only (use --mode ndl)")
    if strategy == "bounded-leaf":
        nbp = bounded_leaf_nbp(q, tbox)
        c = bp.nbp_to_circuit(nbp)
        stats.update(nbp_vertices=len(nbp.vertices), nbp_edges=len(nbp.edges), circuit_size=c.size)
        return Rewriting(mode, strategy, circuit_to_ndl(q, tbox, c), stats)
    prog = btw_thgp(q, tbox, width_limit)
    c = bp.thgp_to_circuit(prog.program)
    stats.update(
        thgp_vertices=len(prog.program.vertices),
        thgp_hyperedges=len(prog.program.hyperedges),
        vertex_bound=prog.vertex_bound,
        hyperedge_bound=prog.hyperedge_bound,
        circuit_size=c.size,
    )
    return Rewriting(mode, strategy, circuit_to_ndl(q, tbox, c), stats)
