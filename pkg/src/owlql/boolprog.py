"""Boolean programs: formulas, circuits, branching programs and hypergraph programs.

All program values are immutable. Labels of NBP edges and HGP vertices are
conjunctions of literals (``Label``); the constant ``1`` is the empty
conjunction and ``0`` is a separate value.

Circuits have no constant gates: an AND gate without inputs is ``1`` and an OR
gate without inputs is ``0``. Negation only occurs on inputs, written ``!x``.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from itertools import count
from typing import Iterable, Mapping, Union

from .syntax import natural_key


class ProgramError(ValueError):
    """Malformed program or unsupported conversion input."""


class MissingVariable(ProgramError):
    pass


class HgpTooLarge(ProgramError):
    """Exact hypergraph-program evaluation refused: too many zero vertices."""


DEFAULT_ZERO_LIMIT = 24


def _lookup(assignment: Mapping, var: str) -> bool:
    try:
        return bool(assignment[var])
    except KeyError:
        raise MissingVariable(f"no value for variable {var!r}") from None


def literal_value(lit: str, assignment: Mapping) -> bool:
    if lit.startswith("!"):
        return not _lookup(assignment, lit[1:])
    return _lookup(assignment, lit)


def literal_var(lit: str) -> str:
    return lit[1:] if lit.startswith("!") else lit


# labels


@dataclass(frozen=True)
class Label:
    """``0`` (``lits is None``) or a conjunction of literals (``()`` is ``1``)."""

    lits: tuple | None

    @classmethod
    def conj(cls, lits: Iterable[str]) -> "Label":
        return cls(tuple(sorted(set(lits), key=lambda l: (natural_key(literal_var(l)), l))))

    @classmethod
    def parse(cls, text: str) -> "Label":
        text = text.strip()
        if text == "0":
            return ZERO
        if text in ("1", ""):
            return ONE
        lits = []
        for part in text.split("&"):
            part = part.strip()
            name = literal_var(part)
            if not name or not (name[0].isalpha() or name[0] == "_") or not name.replace("_", "a").replace(".", "a").isalnum():
                raise ProgramError(f"bad literal {part!r} in label {text!r}")
            lits.append(part)
        return cls.conj(lits)

    @property
    def is_zero(self) -> bool:
        return self.lits is None

    @property
    def is_one(self) -> bool:
        return self.lits == ()

    @property
    def variables(self) -> frozenset:
        return frozenset(literal_var(l) for l in self.lits or ())

    @property
    def monotone(self) -> bool:
        return not any(l.startswith("!") for l in self.lits or ())

    def value(self, assignment: Mapping) -> bool:
        if self.lits is None:
            return False
        return all(literal_value(l, assignment) for l in self.lits)

    def __str__(self) -> str:
        if self.lits is None:
            return "0"
        return "&".join(self.lits) if self.lits else "1"


ZERO = Label(None)
ONE = Label(())


def _label(x) -> Label:
    return x if isinstance(x, Label) else Label.parse(str(x))


# formulas


@dataclass(frozen=True)
class Var:
    name: str  # may be a negated literal "!x"

    @property
    def size(self) -> int:
        return 1


@dataclass(frozen=True)
class Const:
    value: bool

    @property
    def size(self) -> int:
        return 1


@dataclass(frozen=True)
class And:
    children: tuple

    @property
    def size(self) -> int:
        return 1 + sum(c.size for c in self.children)


@dataclass(frozen=True)
class Or:
    children: tuple

    @property
    def size(self) -> int:
        return 1 + sum(c.size for c in self.children)


Formula = Union[Var, Const, And, Or]


def eval_formula(f: Formula, assignment: Mapping) -> bool:
    if isinstance(f, Var):
        return literal_value(f.name, assignment)
    if isinstance(f, Const):
        return f.value
    if isinstance(f, And):
        return all(eval_formula(c, assignment) for c in f.children)
    return any(eval_formula(c, assignment) for c in f.children)


def formula_vars(f: Formula) -> frozenset:
    if isinstance(f, Var):
        return frozenset((literal_var(f.name),))
    if isinstance(f, Const):
        return frozenset()
    out = frozenset()
    for c in f.children:
        out |= formula_vars(c)
    return out


# circuits


@dataclass(frozen=True)
class Gate:
    op: str  # "input", "and", "or"
    inputs: tuple = ()
    var: str | None = None


@dataclass(frozen=True)
class MonotoneCircuit:
    """Gates in topological order; ``levels`` is set by the normal-form builder."""

    gates: tuple
    output: int
    levels: tuple | None = field(default=None, compare=False)

    def __post_init__(self):
        if not 0 <= self.output < len(self.gates):
            raise ProgramError("output gate out of range")
        for i, g in enumerate(self.gates):
            if g.op == "input":
                if not g.var or g.inputs:
                    raise ProgramError(f"gate {i}: input gates need a variable and no inputs")
            elif g.op in ("and", "or"):
                if any(not 0 <= j < i for j in g.inputs):
                    raise ProgramError(f"gate {i}: inputs must refer to earlier gates")
            else:
                raise ProgramError(f"gate {i}: unknown op {g.op!r}")

    @property
    def size(self) -> int:
        return len(self.gates)

    @cached_property
    def variables(self) -> frozenset:
        return frozenset(literal_var(g.var) for g in self.gates if g.op == "input")

    @property
    def monotone(self) -> bool:
        return not any(g.op == "input" and g.var.startswith("!") for g in self.gates)

    def cone(self) -> list:
        """Indices of the gates the output depends on, ascending."""
        seen = {self.output}
        todo = [self.output]
        while todo:
            for j in self.gates[todo.pop()].inputs:
                if j not in seen:
                    seen.add(j)
                    todo.append(j)
        return sorted(seen)


def eval_circuit(c: MonotoneCircuit, assignment: Mapping) -> bool:
    vals = []
    for g in c.gates:
        if g.op == "input":
            vals.append(literal_value(g.var, assignment))
        elif g.op == "and":
            vals.append(all(vals[j] for j in g.inputs))
        else:
            vals.append(any(vals[j] for j in g.inputs))
    return vals[c.output]


class CircuitBuilder:
    """Hash-consing gate store with constant folding."""

    def __init__(self):
        self.gates: list = []
        self._ids: dict = {}
        self.true = self._add(Gate("and"))
        self.false = self._add(Gate("or"))

    def _add(self, g: Gate) -> int:
        i = self._ids.get(g)
        if i is None:
            i = len(self.gates)
            self.gates.append(g)
            self._ids[g] = i
        return i

    def input(self, lit: str) -> int:
        return self._add(Gate("input", (), lit))

    def and_(self, xs: Iterable[int]) -> int:
        xs = sorted(set(xs) - {self.true})
        if self.false in xs:
            return self.false
        if len(xs) == 1:
            return xs[0]
        return self._add(Gate("and", tuple(xs)) if xs else Gate("and"))

    def or_(self, xs: Iterable[int]) -> int:
        xs = sorted(set(xs) - {self.false})
        if self.true in xs:
            return self.true
        if len(xs) == 1:
            return xs[0]
        return self._add(Gate("or", tuple(xs)) if xs else Gate("or"))

    def label(self, lab: Label) -> int:
        if lab.is_zero:
            return self.false
        return self.and_(self.input(l) for l in lab.lits)

    def formula(self, f: Formula) -> int:
        if isinstance(f, Var):
            return self.input(f.name)
        if isinstance(f, Const):
            return self.true if f.value else self.false
        parts = [self.formula(c) for c in f.children]
        return self.and_(parts) if isinstance(f, And) else self.or_(parts)

    def build(self, output: int) -> MonotoneCircuit:
        """Circuit restricted to the cone of ``output``, renumbered."""
        keep = MonotoneCircuit(tuple(self.gates), output).cone()
        new = {old: i for i, old in enumerate(keep)}
        gates = tuple(
            Gate(self.gates[o].op, tuple(new[j] for j in self.gates[o].inputs), self.gates[o].var)
            for o in keep
        )
        return MonotoneCircuit(gates, new[output])


def formula_to_circuit(f: Formula) -> MonotoneCircuit:
    b = CircuitBuilder()
    return b.build(b.formula(f))


# non-deterministic branching programs


@dataclass(frozen=True)
class Nbp:
    vertices: tuple
    edges: tuple  # (from, to, Label)
    s: str
    t: str

    def __post_init__(self):
        vs = set(self.vertices)
        if self.s not in vs or self.t not in vs:
            raise ProgramError("source and target must be vertices")
        for a, b, _ in self.edges:
            if a not in vs or b not in vs:
                raise ProgramError(f"edge ({a},{b}) uses an unknown vertex")

    @cached_property
    def variables(self) -> frozenset:
        out = frozenset()
        for *_, lab in self.edges:
            out |= lab.variables
        return out

    @property
    def size(self) -> int:
        return len(self.vertices) + len(self.edges) + len(self.variables)

    @property
    def monotone(self) -> bool:
        return all(lab.monotone for *_, lab in self.edges)


def eval_nbp(p: Nbp, assignment: Mapping) -> bool:
    out = {}
    for a, b, lab in p.edges:
        if lab.value(assignment):
            out.setdefault(a, []).append(b)
    seen = {p.s}
    todo = deque([p.s])
    while todo:
        v = todo.popleft()
        if v == p.t:
            return True
        for w in out.get(v, ()):
            if w not in seen:
                seen.add(w)
                todo.append(w)
    return False


# hypergraph programs


@dataclass(frozen=True)
class Skeleton:
    """Tree underlying a tree hypergraph; program vertex ``i`` is ``edges[i]``."""

    vertices: tuple
    edges: tuple

    @cached_property
    def adjacency(self) -> dict:
        adj = {v: [] for v in self.vertices}
        for i, (a, b) in enumerate(self.edges):
            adj[a].append((b, i))
            adj[b].append((a, i))
        return adj

    def degree(self, v) -> int:
        return len(self.adjacency[v])

    @property
    def leaves(self) -> list:
        return [v for v in self.vertices if self.degree(v) == 1]

    def is_tree(self) -> bool:
        if not self.vertices:
            return False
        if len(self.edges) != len(self.vertices) - 1:
            return False
        seen = {self.vertices[0]}
        todo = [self.vertices[0]]
        while todo:
            for w, _ in self.adjacency[todo.pop()]:
                if w not in seen:
                    seen.add(w)
                    todo.append(w)
        return len(seen) == len(self.vertices)

    def path(self, u, v) -> list:
        """Edge indices on the simple path between two tree vertices."""
        prev = {u: None}
        todo = deque([u])
        while todo:
            x = todo.popleft()
            if x == v:
                break
            for y, i in self.adjacency[x]:
                if y not in prev:
                    prev[y] = (x, i)
                    todo.append(y)
        if v not in prev:
            raise ProgramError(f"no path between {u} and {v}")
        out = []
        while prev[v] is not None:
            v, i = prev[v]
            out.append(i)
        return out

    def interval(self, *vs) -> frozenset:
        """Generalized interval: edge indices of the subtree spanned by ``vs``."""
        out = set()
        for a in vs[1:]:
            out.update(self.path(vs[0], a))
        return frozenset(out)


@dataclass(frozen=True)
class HypergraphProgram:
    vertices: tuple
    hyperedges: tuple  # frozensets of vertices
    labels: tuple  # aligned with vertices
    skeleton: Skeleton | None = None

    def __post_init__(self):
        if len(self.labels) != len(self.vertices):
            raise ProgramError("one label per vertex expected")
        if len(set(self.vertices)) != len(self.vertices):
            raise ProgramError("duplicate vertex names")
        vs = set(self.vertices)
        for e in self.hyperedges:
            if not e <= vs:
                raise ProgramError("hyperedge mentions an unknown vertex")
        if self.skeleton is not None and len(self.skeleton.edges) != len(self.vertices):
            raise ProgramError("skeleton must have one edge per program vertex")

    @cached_property
    def label_of(self) -> dict:
        return dict(zip(self.vertices, self.labels))

    @cached_property
    def variables(self) -> frozenset:
        out = frozenset()
        for lab in self.labels:
            out |= lab.variables
        return out

    @property
    def size(self) -> int:
        return len(self.vertices) + len(self.hyperedges) + len(self.variables)

    @property
    def monotone(self) -> bool:
        return all(lab.monotone for lab in self.labels)

    @cached_property
    def vertex_of_edge(self) -> dict:
        """Tree edge (either orientation) to program vertex."""
        out = {}
        for name, (a, b) in zip(self.vertices, self.skeleton.edges):
            out[(a, b)] = out[(b, a)] = name
        return out

    def interval(self, *tree_vertices) -> frozenset:
        return frozenset(self.vertices[i] for i in self.skeleton.interval(*tree_vertices))


def thgp_problems(p: HypergraphProgram) -> list:
    """Reasons why ``p`` is not a tree hypergraph program (empty when it is)."""
    sk = p.skeleton
    if sk is None:
        return ["no skeleton tree"]
    if not sk.is_tree():
        return ["skeleton is not a tree"]
    index = {name: i for i, name in enumerate(p.vertices)}
    problems = []
    for n, e in enumerate(p.hyperedges):
        edges = {index[v] for v in e}
        if not edges:
            problems.append(f"hyperedge {n} is empty")
            continue
        touched = {}
        for i in edges:
            for v in sk.edges[i]:
                touched.setdefault(v, set()).add(i)
        # connected iff the touched vertices and edges form a tree
        if len(touched) != len(edges) + 1 or not _connected(sk, edges):
            problems.append(f"hyperedge {n} is not a subtree")
            continue
        for v, inside in touched.items():
            if len(inside) < sk.degree(v) and sk.degree(v) != 2:
                problems.append(f"hyperedge {n} has boundary vertex {v} of degree {sk.degree(v)}")
    return problems


def _connected(sk: Skeleton, edges: set) -> bool:
    start = next(iter(edges))
    seen = {start}
    todo = [start]
    while todo:
        i = todo.pop()
        for v in sk.edges[i]:
            for _, j in sk.adjacency[v]:
                if j in edges and j not in seen:
                    seen.add(j)
                    todo.append(j)
    return seen == edges


def is_thgp(p: HypergraphProgram) -> bool:
    return not thgp_problems(p)


def is_interval(p: HypergraphProgram) -> bool:
    return is_thgp(p) and (len(p.skeleton.vertices) <= 2 or len(p.skeleton.leaves) == 2)


def eval_hgp(p: HypergraphProgram, assignment: Mapping, zero_limit: int = DEFAULT_ZERO_LIMIT) -> bool:
    """Is there an independent set of hyperedges covering every vertex labelled 0?"""
    bit = {v: 1 << i for i, v in enumerate(p.vertices)}
    zeros = [bit[v] for v, lab in zip(p.vertices, p.labels) if not lab.value(assignment)]
    if len(zeros) > zero_limit:
        raise HgpTooLarge(f"{len(zeros)} zero vertices exceed the limit of {zero_limit}")
    masks = []
    for e in p.hyperedges:
        m = 0
        for v in e:
            m |= bit[v]
        masks.append(m)
    by_zero = {z: [m for m in masks if m & z] for z in zeros}
    failed = set()

    def search(used: int) -> bool:
        z = next((z for z in zeros if not used & z), None)
        if z is None:
            return True
        if used in failed:
            return False
        for m in by_zero[z]:
            if not m & used and search(used | m):
                return True
        failed.add(used)
        return False

    return search(0)


# NBP -> interval HGP


def _normalized_nbp(p: Nbp) -> tuple:
    """Vertices ordered with s first and t last, plus edges with a 1-loop on t."""
    order = [p.s] + [v for v in p.vertices if v not in (p.s, p.t)] + [p.t]
    edges = list(p.edges)
    if not any(a == p.t and b == p.t and lab.is_one for a, b, lab in edges):
        edges.append((p.t, p.t, ONE))
    return order, edges


def interval_hgp_skeleton_size(p: Nbp) -> int:
    """Number of tree vertices that nbp_to_interval_hgp produces for ``p``."""
    if p.s == p.t:
        return 2
    order, edges = _normalized_nbp(p)
    n, m = len(order), len(edges)
    return 2 * n * n + 2 * m * (n - 1) - 2


def nbp_to_interval_hgp(p: Nbp) -> HypergraphProgram:
    """Interval program built from alternating vertex and edge blocks.

    Block ``l`` of vertices holds ``v_j, vb_j`` for every NBP vertex and block
    ``l`` of edges holds ``e_i, eb_i`` for every NBP edge, in that order along the
    path; ``v_1`` of the first block and ``vb_n`` of the last are dropped. A path
    step ``l`` along ``e_i = (v_j, v_k)`` is the pair of hyperedges
    ``<vb_j^l, e_i^l>`` and ``<eb_i^l, v_k^(l+1)>``.
    """
    if p.s == p.t:
        sk = Skeleton(("a", "b"), (("a", "b"),))
        return HypergraphProgram(("a-b",), (), (ONE,), sk)
    order, edges = _normalized_nbp(p)
    n = len(order)
    pos = {v: j for j, v in enumerate(order, 1)}
    path = []
    for l in range(1, n + 1):
        for j in range(1, n + 1):
            path += [f"v{j}.{l}", f"vb{j}.{l}"]
        if l < n:
            for i in range(1, len(edges) + 1):
                path += [f"e{i}.{l}", f"eb{i}.{l}"]
    path = path[1:-1]
    tree_edges = tuple(zip(path, path[1:]))
    sk = Skeleton(tuple(path), tree_edges)
    names = tuple(f"{a}-{b}" for a, b in tree_edges)
    labels = []
    for a, b in tree_edges:
        if a.startswith("e") and b.startswith("eb"):
            i = int(a[1:].split(".")[0])
            labels.append(edges[i - 1][2])
        elif a.startswith("v") and b.startswith("vb"):
            # the copies of one vertex: joined when a path goes through it
            labels.append(ONE)
        else:
            labels.append(ZERO)
    prog = HypergraphProgram(names, (), tuple(labels), sk)
    hyper = []
    for l in range(1, n):
        for i, (a, b, _) in enumerate(edges, 1):
            j, k = pos[a], pos[b]
            hyper.append(prog.interval(f"vb{j}.{l}", f"e{i}.{l}"))
            hyper.append(prog.interval(f"eb{i}.{l}", f"v{k}.{l + 1}"))
    return HypergraphProgram(names, tuple(hyper), tuple(labels), sk)


# circuit -> THGP


def and_depths(c: MonotoneCircuit) -> list:
    """AND-depth of every gate: nested AND count for AND gates, the deepest AND below for OR gates."""
    d = []
    for g in c.gates:
        below = max((d[j] for j in g.inputs), default=0)
        d.append(below + 1 if g.op == "and" and g.inputs else below)
    return d


def layered(c: MonotoneCircuit) -> MonotoneCircuit:
    """Equivalent circuit whose AND gates read gates one AND-level down and whose
    OR gates read gates of their own level.

    Shallower inputs are lifted by AND-ing them with the constant 1. Unreachable
    gates are dropped. Raises ProgramError unless AND gates have fan-in 2.
    """
    old_depth = and_depths(c)
    lifted: dict = {}
    new_of: dict = {}
    depth: dict = {}
    gates = []

    def add(g: Gate, d: int) -> int:
        gates.append(g)
        depth[len(gates) - 1] = d
        return len(gates) - 1

    ones: list = []

    def one_at(d: int) -> int:
        # constant 1 with AND-depth d: a balanced AND of ones one level down
        while len(ones) <= d:
            e = len(ones)
            ones.append(add(Gate("and", (ones[-1], ones[-1])) if e else Gate("and"), e))
        return ones[d]

    def lift(i: int, target: int) -> int:
        while depth[i] < target:
            key = (i, depth[i] + 1)
            if key not in lifted:
                lifted[key] = add(Gate("and", (i, one_at(depth[i]))), depth[i] + 1)
            i = lifted[key]
        return i

    for k in c.cone():
        g = c.gates[k]
        if g.op == "and" and len(g.inputs) not in (0, 2):
            raise ProgramError(f"gate {k}: AND gates must have fan-in 2")
        if g.op == "input" or not g.inputs:
            new_of[k] = add(g, 0)
        elif g.op == "and":
            t = old_depth[k] - 1
            new_of[k] = add(Gate("and", tuple(lift(new_of[j], t) for j in g.inputs)), old_depth[k])
        else:
            t = old_depth[k]
            new_of[k] = add(Gate("or", tuple(lift(new_of[j], t) for j in g.inputs)), t)
    return MonotoneCircuit(tuple(gates), new_of[c.output])


def circuit_to_thgp(c: MonotoneCircuit) -> HypergraphProgram:
    """Tree hypergraph program computing the same function as ``c``.

    Each gate gets a triple ``w, v, u``. Gates of the top AND-level form a path
    from the root (highest index first); below its last ``u`` a branch vertex
    splits into the subcircuit of the first AND inputs and that of the second AND
    inputs, each laid out the same way. A subcircuit reachable from both sides is
    laid out twice. Hyperedges: ``<w_i, u_i>`` for every gate but the output,
    ``<v_j, v_k, v_i>`` for ``g_i = g_j & g_k`` and ``<v_k, v_i>`` for each input
    of an OR gate. Leaf gates label ``{v, u}`` with their literal.
    """
    c = layered(c)
    depth = and_depths(c)
    gates = c.gates
    vertices: list = []
    edges: list = []
    labels: list = []
    copies = count()

    def link(a, b, lab):
        edges.append((a, b))
        labels.append(lab)

    def closure(roots) -> list:
        seen = set(roots)
        todo = list(roots)
        while todo:
            for j in gates[todo.pop()].inputs:
                if j not in seen:
                    seen.add(j)
                    todo.append(j)
        return sorted(seen)

    triples: list = []  # (w, v, u, gate)
    hyper: list = []  # tuples of tree vertices

    def place(members: list, parent, tag: str) -> dict:
        """Lay out ``members`` below ``parent``; returns gate -> v-vertex."""
        top_level = max(depth[i] for i in members)
        top = sorted((i for i in members if depth[i] == top_level), reverse=True)
        vof = {}
        prev = parent
        for i in top:
            w, v, u = (f"{x}{i + 1}{tag}" for x in "wvu")
            leaf = gates[i].op == "input" or not gates[i].inputs
            if prev is None:
                vertices.extend([v, u])
            else:
                vertices.extend([w, v, u])
                link(prev, w, ONE)
                link(w, v, ZERO)
                hyper.append((w, u))
            if gates[i].op == "input":
                link(v, u, Label.conj([gates[i].var]))
            elif leaf:
                link(v, u, ONE if gates[i].op == "and" else ZERO)
            else:
                link(v, u, ZERO)
            vof[i] = v
            triples.append((w, v, u, i))
            prev = u
        ands = [i for i in top if gates[i].op == "and" and gates[i].inputs]
        if ands:
            branch = f"b{next(copies)}"
            vertices.append(branch)
            link(prev, branch, ONE)
            lsub = closure([gates[i].inputs[0] for i in ands])
            rsub = closure([gates[i].inputs[1] for i in ands])
            lmap = place(lsub, branch, f"{tag}L")
            rmap = place(rsub, branch, f"{tag}R")
            for i in ands:
                j, k = gates[i].inputs
                hyper.append((lmap[j], rmap[k], vof[i]))
            sub = {**rmap, **lmap}
        else:
            sub = {}
        for i in top:
            if gates[i].op == "or":
                for k in gates[i].inputs:
                    hyper.append((vof[k] if k in vof else sub[k], vof[i]))
        return vof

    place(closure([c.output]), None, "")
    sk = Skeleton(tuple(vertices), tuple(edges))
    names = tuple(f"{a}-{b}" for a, b in edges)
    prog = HypergraphProgram(names, (), tuple(labels), sk)
    hyperedges = tuple(dict.fromkeys(prog.interval(*h) for h in hyper))
    return HypergraphProgram(names, hyperedges, tuple(labels), sk)


# THGP -> circuit


def thgp_to_circuit(p: HypergraphProgram) -> MonotoneCircuit:
    """Circuit computing a tree hypergraph program, by dynamic programming over
    the skeleton rooted at a leaf.

    For a tree edge ``e`` and a hyperedge ``h`` containing it (or none), one gate
    says whether ``e`` and everything below it can be covered when ``e`` belongs
    to ``h``. Below a branching vertex no hyperedge can stop, so the children
    combine by AND.
    """
    problems = thgp_problems(p)
    if problems:
        raise ProgramError("not a tree hypergraph program: " + "; ".join(problems))
    b = CircuitBuilder()
    sk = p.skeleton
    if not sk.edges:
        return b.build(b.true)
    root = min(sk.leaves, key=lambda v: sk.vertices.index(v))
    # orient: child vertex and child edges of each edge, parents before children
    order = []
    child_of = {}
    below = {}
    todo = [(root, None)]
    while todo:
        x, up = todo.pop()
        kids = []
        for y, i in sk.adjacency[x]:
            if i != up:
                child_of[i] = y
                kids.append(i)
                todo.append((y, i))
                order.append(i)
        if up is not None:
            below[up] = kids
    containing = {i: [] for i in range(len(sk.edges))}
    hsets = []
    index = {name: i for i, name in enumerate(p.vertices)}
    for n, h in enumerate(p.hyperedges):
        hs = frozenset(index[v] for v in h)
        hsets.append(hs)
        for i in hs:
            containing[i].append(n)
    good = {}
    start = {}
    parent = {}
    for i, kids in below.items():
        for k in kids:
            parent[k] = i
    for i in reversed(order):
        kids = below.get(i, [])
        good[i, None] = b.and_([b.label(p.labels[i])] + [start[k] for k in kids])
        for n in containing[i]:
            h = hsets[n]
            good[i, n] = b.and_(good[k, n] if k in h else start[k] for k in kids)
        up = parent.get(i)
        start[i] = b.or_(
            [good[i, None]] + [good[i, n] for n in containing[i] if up is None or up not in hsets[n]]
        )
    first = order[0]
    return b.build(start[first])


# NBP -> circuit


def _topological(p: Nbp) -> list | None:
    """Vertices in topological order, or None when the graph has a cycle."""
    indeg = {v: 0 for v in p.vertices}
    out = {v: [] for v in p.vertices}
    for a, c, _ in p.edges:
        if a == c:
            return None
        out[a].append(c)
        indeg[c] += 1
    todo = deque(v for v in p.vertices if indeg[v] == 0)
    order = []
    while todo:
        v = todo.popleft()
        order.append(v)
        for w in out[v]:
            indeg[w] -= 1
            if indeg[w] == 0:
                todo.append(w)
    return order if len(order) == len(p.vertices) else None


def nbp_to_circuit(p: Nbp) -> MonotoneCircuit:
    """Reachability from ``s`` to ``t``.

    Acyclic programs get one OR gate per vertex in topological order; anything
    else goes through repeated Boolean squaring of the edge-label matrix.
    """
    if not p.monotone:
        raise ProgramError("nbp_to_circuit needs a monotone program")
    b = CircuitBuilder()
    order = _topological(p)
    if order is not None:
        into = {v: [] for v in p.vertices}
        for a, c, lab in p.edges:
            into[c].append((a, lab))
        reach = {}
        for v in order:
            parts = [b.and_([reach[a], b.label(lab)]) for a, lab in into[v]]
            reach[v] = b.true if v == p.s else b.or_(parts)
        return b.build(reach[p.t])
    vs = list(p.vertices)
    n = len(vs)
    at = {v: i for i, v in enumerate(vs)}
    m = [[b.true if i == j else b.false for j in range(n)] for i in range(n)]
    for a, c, lab in p.edges:
        m[at[a]][at[c]] = b.or_([m[at[a]][at[c]], b.label(lab)])
    for _ in range(max(0, math.ceil(math.log2(n))) if n > 1 else 0):
        m = [
            [b.or_(b.and_([m[i][k], m[k][j]]) for k in range(n)) for j in range(n)]
            for i in range(n)
        ]
    return b.build(m[at[p.s]][at[p.t]])


# JSON documents


def circuit_to_json(c: MonotoneCircuit) -> dict:
    gates = []
    for g in c.gates:
        d = {"op": g.op, "inputs": list(g.inputs)}
        if g.var is not None:
            d["var"] = g.var
        gates.append(d)
    return {"gates": gates, "output": c.output}


def circuit_from_json(doc: Mapping) -> MonotoneCircuit:
    try:
        gates = tuple(
            Gate(g["op"], tuple(int(j) for j in g.get("inputs", ())), g.get("var"))
            for g in doc["gates"]
        )
        return MonotoneCircuit(gates, int(doc["output"]))
    except (KeyError, TypeError) as e:
        raise ProgramError(f"bad circuit document: {e}") from None


def nbp_to_json(p: Nbp) -> dict:
    return {
        "vertices": list(p.vertices),
        "edges": [{"from": a, "to": b, "label": str(lab)} for a, b, lab in p.edges],
        "s": p.s,
        "t": p.t,
    }


def nbp_from_json(doc: Mapping) -> Nbp:
    try:
        edges = tuple((e["from"], e["to"], _label(e["label"])) for e in doc["edges"])
        return Nbp(tuple(doc["vertices"]), edges, doc["s"], doc["t"])
    except (KeyError, TypeError) as e:
        raise ProgramError(f"bad NBP document: {e}") from None


def hgp_to_json(p: HypergraphProgram) -> dict:
    doc = {}
    if p.skeleton is not None:
        doc["skeleton"] = {
            "vertices": list(p.skeleton.vertices),
            "edges": [list(e) for e in p.skeleton.edges],
        }
    order = {v: i for i, v in enumerate(p.vertices)}
    doc["hvertices"] = list(p.vertices)
    doc["hyperedges"] = [sorted(e, key=order.__getitem__) for e in p.hyperedges]
    doc["labels"] = {v: str(lab) for v, lab in zip(p.vertices, p.labels)}
    return doc


def hgp_from_json(doc: Mapping) -> HypergraphProgram:
    try:
        sk = None
        if doc.get("skeleton") is not None:
            s = doc["skeleton"]
            sk = Skeleton(tuple(s["vertices"]), tuple(tuple(e) for e in s["edges"]))
        vertices = tuple(doc["hvertices"])
        labels = doc["labels"]
        if isinstance(labels, Mapping):
            labels = [labels[v] for v in vertices]
        return HypergraphProgram(
            vertices,
            tuple(frozenset(e) for e in doc["hyperedges"]),
            tuple(_label(l) for l in labels),
            sk,
        )
    except (KeyError, TypeError) as e:
        raise ProgramError(f"bad hypergraph program document: {e}") from None


def program_to_json(p) -> dict:
    if isinstance(p, MonotoneCircuit):
        return circuit_to_json(p)
    if isinstance(p, Nbp):
        return nbp_to_json(p)
    if isinstance(p, HypergraphProgram):
        return hgp_to_json(p)
    raise TypeError(f"not a program: {type(p).__name__}")


def program_from_json(doc: Mapping):
    if "gates" in doc:
        return circuit_from_json(doc)
    if "hyperedges" in doc:
        return hgp_from_json(doc)
    if "s" in doc and "t" in doc:
        return nbp_from_json(doc)
    raise ProgramError("unrecognised program document")


def dumps(p) -> str:
    return json.dumps(program_to_json(p), indent=1)


def loads(text: str):
    try:
        return program_from_json(json.loads(text))
    except json.JSONDecodeError as e:
        raise ProgramError(f"invalid JSON: {e}") from None


def program_vars(p) -> frozenset:
    if isinstance(p, (Var, Const, And, Or)):
        return formula_vars(p)
    return p.variables


def evaluate(p, assignment: Mapping) -> bool:
    if isinstance(p, MonotoneCircuit):
        return eval_circuit(p, assignment)
    if isinstance(p, Nbp):
        return eval_nbp(p, assignment)
    if isinstance(p, HypergraphProgram):
        return eval_hgp(p, assignment)
    return eval_formula(p, assignment)
