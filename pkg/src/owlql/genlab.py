"""Instance generators: reductions from Boolean programs to ontology-mediated
queries, random programs, random knowledge bases and the differential harness.

Every generator takes an explicit ``random.Random`` (or a seed) and never reads
global entropy, so a seed always reproduces the same instance.
"""

from __future__ import annotations

import random
import re
from collections import deque
from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Mapping, NamedTuple

from . import boolprog as bp
from . import canonical, executor, reasoner, rewriter
from .reasoner import OMEGA
from .syntax import (
    Atom,
    AtomicConcept,
    ConceptDisj,
    ConceptIncl,
    ConjunctiveQuery,
    DataInstance,
    ExistsRole,
    Ontology,
    Role,
    RoleIncl,
    natural_key,
    print_data,
    print_ontology,
    print_query,
)


class ClassError(ValueError):
    """Unknown instance class or a generated instance outside its class."""


# tree hypergraph programs to queries


class ThgpReduction(NamedTuple):
    query: ConjunctiveQuery
    tbox: Ontology
    gamma: Callable[[Mapping], dict]


def _tree_numbers(sk: bp.Skeleton) -> dict:
    """Vertex numbering used in predicate and variable names."""
    m = [re.fullmatch(r"[A-Za-z_]*(\d+)", str(v)) for v in sk.vertices]
    if all(m):
        nums = [int(x.group(1)) for x in m]
        if len(set(nums)) == len(nums):
            return dict(zip(sk.vertices, nums))
    return {v: i + 1 for i, v in enumerate(sk.vertices)}


def thgp_to_query_ontology(p: bp.HypergraphProgram) -> ThgpReduction:
    """Boolean query and depth-two ontology whose primitive function is the
    function of the tree hypergraph program ``p``.

    The query doubles every skeleton edge ``{v_i, v_j}`` (``v_i`` nearer the root)
    into ``S{i}_{j}(y_i, y_i_j), Sp{i}_{j}(y_i_j, y_j)``. Each hyperedge ``e``
    (numbered ``n`` from 1) contributes concept ``Be{n}`` and roles ``Re{n}``,
    ``Rpe{n}`` whose canonical model folds the subquery of ``e`` onto one
    individual. The root is the first leaf of the skeleton.
    """
    problems = bp.thgp_problems(p)
    if problems:
        raise bp.ProgramError("not a tree hypergraph program: " + "; ".join(problems))
    sk = p.skeleton
    num = _tree_numbers(sk)
    root = sk.leaves[0]
    parent = {root: None}
    down = {}  # program vertex -> (upper, lower) tree vertices
    todo = deque([root])
    while todo:
        v = todo.popleft()
        for w, i in sk.adjacency[v]:
            if w not in parent:
                parent[w] = v
                down[p.vertices[i]] = (v, w)
                todo.append(w)

    def s(v, w, primed=False):
        return f"{'Sp' if primed else 'S'}{num[v]}_{num[w]}"

    def mid(v, w):
        return f"y{num[v]}_{num[w]}"

    atoms = []
    for name in p.vertices:
        v, w = down[name]
        atoms.append(Atom(s(v, w), (f"y{num[v]}", mid(v, w))))
        atoms.append(Atom(s(v, w, True), (mid(v, w), f"y{num[w]}")))
    query = ConjunctiveQuery((), atoms, "q")

    axioms = []
    for n, e in enumerate(p.hyperedges, 1):
        r, rp = Role(f"Re{n}"), Role(f"Rpe{n}")
        inner = [down[x] for x in sorted(e, key=natural_key)]
        tops = {v for v, _ in inner} - {w for _, w in inner}
        (top,) = tops
        touched = {v for pair in inner for v in pair}
        lower = set()
        for v in touched - {top}:
            incident = {p.vertices[i] for _, i in sk.adjacency[v]}
            if not incident <= e or sk.degree(v) == 1:
                lower.add(v)
        axioms.append(ConceptIncl(AtomicConcept(f"Be{n}"), ExistsRole(r)))
        axioms.append(ConceptIncl(ExistsRole(r.inv), ExistsRole(rp)))
        for v, w in inner:
            if v == top:
                axioms.append(RoleIncl(r, Role(s(v, w))))
            if w in lower:
                axioms.append(RoleIncl(r.inv, Role(s(v, w, True))))
            else:
                axioms.append(RoleIncl(rp, Role(s(v, w, True))))
            if v != top:
                axioms.append(RoleIncl(rp, Role(s(v, w)).inv))
    tbox = Ontology(tuple(dict.fromkeys(axioms)))

    def gamma(alpha: Mapping) -> dict:
        out = {}
        for n in range(1, len(p.hyperedges) + 1):
            out[f"Be{n}"] = True
            out[f"Re{n}"] = False
            out[f"Rpe{n}"] = False
        for name, lab in zip(p.vertices, p.labels):
            v, w = down[name]
            out[s(v, w)] = out[s(v, w, True)] = lab.value(alpha)
        return out

    return ThgpReduction(query, tbox, gamma)


# circuits in normal form


def circuit_levels(c: bp.MonotoneCircuit) -> dict | None:
    """Level of every gate in the output cone (output on level 1), or None when
    some gate is reachable along paths of different lengths."""
    level = {c.output: 1}
    todo = deque([c.output])
    while todo:
        i = todo.popleft()
        for j in c.gates[i].inputs:
            if j not in level:
                level[j] = level[i] + 1
                todo.append(j)
            elif level[j] != level[i] + 1:
                return None
    return level


def normal_form_problems(c: bp.MonotoneCircuit) -> list:
    """Reasons why ``c`` is not in the layered AND/OR normal form (empty if it is)."""
    level = circuit_levels(c)
    if level is None:
        return ["gates must only read gates exactly one level down"]
    problems = []
    out = c.gates[c.output]
    if out.op != "and":
        problems.append("output gate must be an AND gate")
    top = max(level.values())
    if top % 2 == 0:
        problems.append(f"number of levels must be odd (got {top})")
    for i, lv in sorted(level.items()):
        g = c.gates[i]
        if g.op == "input":
            if lv != top:
                problems.append(f"input gate {i} is on level {lv}, not the greatest level {top}")
        elif lv == top:
            problems.append(f"gate {i} on the greatest level is not an input")
        elif not g.inputs:
            problems.append(f"gate {i} is a constant")
        elif lv % 2 == 0 and g.op != "or":
            problems.append(f"even-level gate {i} must be an OR gate")
        elif lv % 2 == 1 and g.op != "and":
            problems.append(f"odd-level gate {i} must be an AND gate")
        elif g.op == "and" and len(g.inputs) != 2:
            problems.append(f"AND gate {i} has fan-in {len(g.inputs)}, not 2")
    return problems


def normalize_circuit(c: bp.MonotoneCircuit) -> bp.MonotoneCircuit:
    """Equivalent circuit in normal form, with ``levels`` filled in.

    Constants are folded, wide ANDs are split into balanced binary trees and
    gates are re-placed level by level; a gate needed on a level of the wrong
    kind is padded by a unary OR (even levels) or by an AND reading the same
    gate twice (odd levels).
    """
    # fold constants; nodes are ("lit", l), ("and", (a, b)), ("or", tuple)
    node: dict = {}
    nodes: list = []
    ids: dict = {}

    def mk(n) -> int:
        if n not in ids:
            ids[n] = len(nodes)
            nodes.append(n)
        return ids[n]

    def pair(xs: list) -> int:
        if len(xs) == 1:
            return xs[0]
        h = len(xs) // 2
        return mk(("and", (pair(xs[:h]), pair(xs[h:]))))

    for k in c.cone():
        g = c.gates[k]
        if g.op == "input":
            node[k] = mk(("lit", g.var))
            continue
        vals = [node[j] for j in g.inputs]
        absorbing, neutral = (False, True) if g.op == "and" else (True, False)
        if any(v is absorbing for v in vals):
            node[k] = absorbing
            continue
        xs = [v for v in vals if v is not neutral]
        if not xs:
            node[k] = neutral
        elif g.op == "and":
            node[k] = pair(xs) if len(xs) != 2 else mk(("and", tuple(xs)))
        else:
            node[k] = mk(("or", tuple(dict.fromkeys(xs))))
    out = node[c.output]
    if isinstance(out, bool):
        variables = sorted(c.variables, key=natural_key) or ["x1"]
        x = variables[0]
        lits = (mk(("lit", x)), mk(("lit", "!" + x)))
        out = mk(("or", lits) if out else ("and", lits))

    need: dict = {}  # (node, parity) -> levels used from its own level down

    def depth(n: int, odd: bool) -> int:
        key = (n, odd)
        if key not in need:
            kind, args = nodes[n]
            if kind == "lit":
                need[key] = 1
            elif (kind == "and") == odd:
                need[key] = 1 + max(depth(a, not odd) for a in args)
            else:
                need[key] = 1 + depth(n, not odd)
        return need[key]

    top = max(depth(out, True), 3)
    if top % 2 == 0:
        top += 1

    gates: list = []
    levels: list = []
    placed: dict = {}

    def at(n: int, lv: int) -> int:
        key = (n, lv)
        if key in placed:
            return placed[key]
        kind, args = nodes[n]
        odd = lv % 2 == 1
        if kind == "lit" and lv == top:
            g = bp.Gate("input", (), args)
        elif kind == "lit" or (kind == "and") != odd:
            below = at(n, lv + 1)
            g = bp.Gate("and", (below, below)) if odd else bp.Gate("or", (below,))
        else:
            g = bp.Gate(kind, tuple(at(a, lv + 1) for a in args))
        gates.append(g)
        levels.append(lv)
        placed[key] = len(gates) - 1
        return placed[key]

    root = at(out, 1)
    return bp.MonotoneCircuit(tuple(gates), root, tuple(levels))


def word_length(d: int) -> int:
    """Length of the word for ``d`` AND-levels: eight letters around two copies of the previous word."""
    return 0 if d == 0 else 2 * word_length(d - 1) + 8


def linear_word(d: int) -> list:
    """Letters of the word for ``d`` AND-levels, as ``(role, inverted)`` pairs."""
    w: list = []
    for _ in range(d):
        w = (
            [("L", True), ("U", True)] + w + [("U", False), ("L", False)]
            + [("R", True), ("U", True)] + w + [("U", False), ("R", False)]
        )
    return w


def linear_query(d: int) -> ConjunctiveQuery:
    w = linear_word(d)
    atoms = []
    for i, (role, inv) in enumerate(w, 1):
        a, b = f"y{i - 1}", f"y{i}"
        atoms.append(Atom(role, (b, a) if inv else (a, b)))
    for i in range(1, len(w)):
        if w[i - 1] == ("U", True) and w[i] == ("U", False):
            atoms.append(Atom("A", (f"y{i}",)))
    return ConjunctiveQuery(("y0",), atoms, "q")


def input_assignment(c: bp.MonotoneCircuit, x) -> dict:
    """Map input bits (a 0/1 string, a sequence or a mapping) to circuit variables in natural order."""
    if isinstance(x, Mapping):
        return dict(x)
    names = sorted(c.variables, key=natural_key)
    bits = [ch == "1" for ch in x] if isinstance(x, str) else [bool(b) for b in x]
    if len(bits) != len(names):
        raise ValueError(f"expected {len(names)} input bits for variables {', '.join(names)}, got {len(bits)}")
    return dict(zip(names, bits))


class CircuitReduction(NamedTuple):
    query: ConjunctiveQuery
    tbox: Ontology
    abox: DataInstance


def circuit_to_linear_query(c: bp.MonotoneCircuit, x) -> CircuitReduction:
    """Linear query, ontology and one-fact data instance such that ``a`` is a
    certain answer iff the normal-form circuit ``c`` accepts input ``x``.

    Gates are numbered from the output (``G1``) backwards through the gate list;
    ``P{i}_{j}`` links gate ``i`` to its predecessor ``j``.
    """
    problems = normal_form_problems(c)
    if problems:
        raise bp.ProgramError("circuit not in normal form: " + "; ".join(problems))
    alpha = input_assignment(c, x)
    level = circuit_levels(c)
    cone = sorted(level, reverse=True)
    gid = {k: n for n, k in enumerate(cone, 1)}
    axioms = []
    for k in cone:
        g = c.gates[k]
        gi = AtomicConcept(f"G{gid[k]}")
        if g.op == "input":
            if bp.literal_value(g.var, alpha):
                axioms.append(ConceptIncl(gi, AtomicConcept("A")))
            continue
        for pos, j in enumerate(g.inputs):
            pij = Role(f"P{gid[k]}_{gid[j]}")
            axioms.append(ConceptIncl(gi, ExistsRole(pij.inv)))
            axioms.append(ConceptIncl(ExistsRole(pij), AtomicConcept(f"G{gid[j]}")))
            kind = "U" if g.op == "or" else ("L", "R")[pos]
            axioms.append(RoleIncl(pij, Role(kind)))
    d = (max(level.values()) - 1) // 2
    return CircuitReduction(
        linear_query(d),
        Ontology(tuple(dict.fromkeys(axioms))),
        DataInstance([Atom(f"G{gid[c.output]}", ("a",))]),
    )


def sample_circuit() -> bp.MonotoneCircuit:
    """The five-level example circuit over x1..x5; gate list index ``16 - n`` is gate ``g_n``."""
    table = {
        16: ("input", "!x1"), 15: ("input", "x5"), 14: ("input", "x4"),
        13: ("input", "!x3"), 12: ("input", "x2"), 11: ("input", "x1"),
        10: ("or", (14, 15, 16)), 9: ("or", (12, 13, 14)), 8: ("or", (11, 13)), 7: ("or", (11, 12)),
        6: ("and", (8, 10)), 5: ("and", (8, 9)), 4: ("and", (7, 8)),
        3: ("or", (5, 6)), 2: ("or", (4, 5)),
        1: ("and", (2, 3)),
    }
    gates = []
    for n in range(16, 0, -1):
        op, arg = table[n]
        if op == "input":
            gates.append(bp.Gate("input", (), arg))
        else:
            gates.append(bp.Gate(op, tuple(16 - m for m in arg)))
    return bp.MonotoneCircuit(tuple(gates), 15, tuple(sample_circuit_levels()))


def sample_circuit_levels() -> list:
    by_gate = {1: 1, 2: 2, 3: 2, 4: 3, 5: 3, 6: 3, 7: 4, 8: 4, 9: 4, 10: 4}
    return [by_gate.get(n, 5) for n in range(16, 0, -1)]


# random Boolean programs


def _rng(seed) -> random.Random:
    return seed if isinstance(seed, random.Random) else random.Random(seed)


def _literal(rng: random.Random, n_vars: int, negations: bool) -> str:
    x = f"x{rng.randint(1, n_vars)}"
    return "!" + x if negations and rng.random() < 0.3 else x


def random_label(rng: random.Random, n_vars: int, negations: bool = True) -> bp.Label:
    r = rng.random()
    if r < 0.1:
        return bp.ZERO
    if r < 0.2:
        return bp.ONE
    k = 1 if r < 0.8 else 2
    return bp.Label.conj(_literal(rng, n_vars, negations) for _ in range(k))


def random_circuit(
    seed,
    n_vars: int = 4,
    n_gates: int = 8,
    negations: bool = True,
    max_fanin: int = 3,
    semi_unbounded: bool = False,
) -> bp.MonotoneCircuit:
    """Random circuit: ``n_vars`` literal inputs, then ``n_gates`` AND/OR gates
    reading earlier gates; the last gate is the output.

    With ``semi_unbounded`` every AND gate has fan-in exactly 2.
    """
    rng = _rng(seed)
    gates = [bp.Gate("input", (), _literal(rng, n_vars, negations)) for _ in range(n_vars)]
    for _ in range(n_gates):
        op = rng.choice(("and", "or"))
        k = 2 if op == "and" and semi_unbounded else rng.randint(1, max_fanin)
        ins = tuple(rng.randrange(len(gates)) for _ in range(k))
        gates.append(bp.Gate(op, ins))
    return bp.MonotoneCircuit(tuple(gates), len(gates) - 1)


def random_normal_circuit(
    seed, and_levels: int = 2, width: int = 3, n_vars: int = 5, negations: bool = True
) -> bp.MonotoneCircuit:
    """Random circuit already in normal form with ``2 * and_levels + 1`` levels."""
    rng = _rng(seed)
    top = 2 * and_levels + 1
    gates: list = []
    levels: list = []
    layer = []
    for _ in range(width):
        gates.append(bp.Gate("input", (), _literal(rng, n_vars, negations)))
        levels.append(top)
        layer.append(len(gates) - 1)
    for lv in range(top - 1, 0, -1):
        count = 1 if lv == 1 else width
        nxt = []
        for _ in range(count):
            if lv % 2:
                ins = (rng.choice(layer), rng.choice(layer))
                gates.append(bp.Gate("and", ins))
            else:
                ins = tuple(sorted(set(rng.sample(layer, rng.randint(1, min(3, len(layer)))))))
                gates.append(bp.Gate("or", ins))
            levels.append(lv)
            nxt.append(len(gates) - 1)
        layer = nxt
    full = bp.MonotoneCircuit(tuple(gates), len(gates) - 1)
    keep = full.cone()
    new = {o: i for i, o in enumerate(keep)}
    return bp.MonotoneCircuit(
        tuple(bp.Gate(gates[o].op, tuple(new[j] for j in gates[o].inputs), gates[o].var) for o in keep),
        new[full.output],
        tuple(levels[o] for o in keep),
    )


def random_nbp(seed, n_vertices: int = 6, n_edges: int = 10, n_vars: int = 4, negations: bool = True) -> bp.Nbp:
    rng = _rng(seed)
    vs = tuple(f"v{i}" for i in range(n_vertices))
    edges = tuple(
        (rng.choice(vs), rng.choice(vs), random_label(rng, n_vars, negations)) for _ in range(n_edges)
    )
    return bp.Nbp(vs, edges, vs[0], vs[-1])


def random_tree(rng: random.Random, n: int, max_leaves: int | None = None) -> list:
    """Edges of a random tree on ``0..n-1``; at most ``max_leaves`` vertices of degree <= 1."""
    deg = [0] * n
    edges = []
    for v in range(1, n):
        leaves_now = sum(1 for u in range(v) if deg[u] <= 1)
        targets = list(range(v))
        if max_leaves is not None and v >= 2 and leaves_now >= max_leaves:
            targets = [u for u in targets if deg[u] <= 1]
        u = rng.choice(targets)
        deg[u] += 1
        deg[v] += 1
        edges.append((u, v))
    return edges


def _random_hyperedge(rng: random.Random, sk: bp.Skeleton, names: tuple) -> frozenset:
    grown = {rng.randrange(len(sk.edges))}
    goal = rng.randint(1, max(1, len(sk.edges) // 2 + 1))
    while True:
        frontier = sorted(
            j for i in grown for v in sk.edges[i] for _, j in sk.adjacency[v] if j not in grown
        )
        if len(grown) < goal and frontier:
            grown.add(rng.choice(frontier))
            continue
        # boundary vertices of degree other than 2 must be closed
        bad = [
            v
            for i in grown
            for v in sk.edges[i]
            if sk.degree(v) != 2 and any(j not in grown for _, j in sk.adjacency[v])
        ]
        if not bad:
            return frozenset(names[i] for i in grown)
        grown.update(j for _, j in sk.adjacency[bad[0]])


def random_thgp(
    seed, n_tree_vertices: int = 6, n_hyperedges: int = 3, n_vars: int = 4, negations: bool = True
) -> bp.HypergraphProgram:
    rng = _rng(seed)
    edges = random_tree(rng, n_tree_vertices)
    sk = bp.Skeleton(tuple(f"v{i + 1}" for i in range(n_tree_vertices)),
                     tuple((f"v{a + 1}", f"v{b + 1}") for a, b in edges))
    names = tuple(f"e{a + 1}_{b + 1}" for a, b in edges)
    hyper = []
    for _ in range(n_hyperedges):
        e = _random_hyperedge(rng, sk, names)
        if e not in hyper:
            hyper.append(e)
    labels = tuple(random_label(rng, n_vars, negations) for _ in names)
    return bp.HypergraphProgram(names, tuple(hyper), labels, sk)


# random knowledge bases


@dataclass(frozen=True)
class Sizes:
    query_vars: tuple = (3, 7)
    concepts: int = 3
    roles: int = 3
    axioms: tuple = (4, 9)
    individuals: int = 3
    facts: int = 4
    answer_vars: tuple = (0, 2)


DEFAULT_SIZES = Sizes()


@dataclass(frozen=True)
class InstanceClass:
    """Query topology plus ontology depth bound (None: unbounded, omega allowed)."""

    name: str
    topology: str  # "tree", "leaves", "width" or "graph"
    param: int | None = None
    max_depth: int | None = None

    def __str__(self) -> str:
        return self.name


_CLASS_RE = re.compile(r"([a-z0-9-]+)(?:\((\d+)\))?\Z")


def parse_class(text: str) -> InstanceClass:
    """``trees``, ``bounded-leaf(l)``, ``linear``, ``btw(t)``, ``depth(d)``, ``depth1`` or ``arbitrary``."""
    m = _CLASS_RE.match(text.strip())
    if not m:
        raise ClassError(f"unknown instance class {text!r}")
    name, arg = m.group(1), m.group(2)
    n = int(arg) if arg is not None else None
    if name == "trees" and n is None:
        return InstanceClass(text, "tree", None, 3)
    if name == "bounded-leaf":
        return InstanceClass(text, "leaves", 4 if n is None else n, None)
    if name == "linear" and n is None:
        return InstanceClass(text, "leaves", 2, None)
    if name == "btw":
        return InstanceClass(text, "width", 2 if n is None else n, 2)
    if name == "depth":
        return InstanceClass(text, "width", 2, 1 if n is None else n)
    if name == "depth1" and n is None:
        return InstanceClass(text, "width", 2, 1)
    if name == "arbitrary" and n is None:
        return InstanceClass(text, "graph", None, None)
    raise ClassError(f"unknown instance class {text!r}")


SELFTEST_CLASSES = ("trees", "bounded-leaf", "btw", "depth1")


def _random_role(rng: random.Random, roles: list) -> Role:
    return Role(rng.choice(roles), rng.random() < 0.4)


def _random_axiom(rng: random.Random, concepts: list, roles: list):
    r = rng.random()
    a = AtomicConcept(rng.choice(concepts))
    if r < 0.15:
        return ConceptIncl(a, AtomicConcept(rng.choice(concepts)))
    if r < 0.35:
        return ConceptIncl(a, ExistsRole(_random_role(rng, roles)))
    if r < 0.5:
        return ConceptIncl(ExistsRole(_random_role(rng, roles)), a)
    if r < 0.75:
        # chains of these make generated trees deeper
        return ConceptIncl(ExistsRole(_random_role(rng, roles)), ExistsRole(_random_role(rng, roles)))
    if r < 0.96:
        lhs, rhs = _random_role(rng, roles), _random_role(rng, roles)
        if lhs.name == rhs.name:
            rhs = Role(rng.choice([x for x in roles if x != lhs.name] or roles), rhs.inverted)
        return RoleIncl(lhs, rhs)
    return ConceptDisj(a, AtomicConcept(rng.choice(concepts)))


def _depth_ok(tbox: Ontology, bound: int | None) -> bool:
    if bound is None:
        return True
    d = reasoner.ontology_depth(tbox)
    return d != OMEGA and d <= bound


def random_tbox(rng: random.Random, cls: InstanceClass, sizes: Sizes = DEFAULT_SIZES) -> Ontology:
    concepts = [f"A{i}" for i in range(1, sizes.concepts + 1)]
    roles = [f"P{i}" for i in range(1, sizes.roles + 1)]
    for _ in range(50):
        n = rng.randint(*sizes.axioms)
        axioms = list(dict.fromkeys(_random_axiom(rng, concepts, roles) for _ in range(n)))
        tbox = Ontology(tuple(axioms))
        if _depth_ok(tbox, cls.max_depth):
            return tbox
    # drop existential right-hand sides until the depth bound holds
    while not _depth_ok(tbox, cls.max_depth):
        i = max(i for i, ax in enumerate(axioms) if isinstance(ax, ConceptIncl) and isinstance(ax.rhs, ExistsRole))
        del axioms[i]
        tbox = Ontology(tuple(axioms))
    return tbox


def _graph_width(n: int, edges: list) -> int:
    graph = {f"v{v}": set() for v in range(n)}
    for a, b in edges:
        if a != b:
            graph[f"v{a}"].add(f"v{b}")
            graph[f"v{b}"].add(f"v{a}")
    width, _ = rewriter.graph_decomposition(graph, rewriter.TREEWIDTH_VAR_LIMIT)
    return width


def _query_edges(rng: random.Random, cls: InstanceClass, n: int) -> list:
    if cls.topology == "tree":
        return random_tree(rng, n)
    if cls.topology == "leaves":
        return random_tree(rng, n, cls.param)
    edges = random_tree(rng, n)
    extra = rng.randint(0, n // 2 + 1) if n > 2 else 0
    for _ in range(extra):
        a, b = rng.sample(range(n), 2)
        if (a, b) in edges or (b, a) in edges:
            continue
        if cls.topology == "width" and _graph_width(n, edges + [(a, b)]) > cls.param:
            continue
        edges.append((a, b))
    return edges


def random_query(rng: random.Random, cls: InstanceClass, sizes: Sizes = DEFAULT_SIZES) -> ConjunctiveQuery:
    n = rng.randint(*sizes.query_vars)
    edges = _query_edges(rng, cls, n)
    k = rng.randint(*sizes.answer_vars)
    answer = sorted(rng.sample(range(n), min(k, n)))
    names = {}
    for i, v in enumerate(answer, 1):
        names[v] = f"x{i}"
    rest = [v for v in range(n) if v not in names]
    for i, v in enumerate(rest, 1):
        names[v] = f"y{i}"
    roles = [f"P{i}" for i in range(1, sizes.roles + 1)]
    concepts = [f"A{i}" for i in range(1, sizes.concepts + 1)]
    atoms = []
    for a, b in edges:
        if rng.random() < 0.5:
            a, b = b, a
        atoms.append(Atom(rng.choice(roles), (names[a], names[b])))
        if rng.random() < 0.1:
            atoms.append(Atom(rng.choice(roles), (names[b], names[a])))
    for v in range(n):
        if rng.random() < 0.25:
            atoms.append(Atom(rng.choice(concepts), (names[v],)))
    return ConjunctiveQuery(tuple(names[v] for v in answer), atoms, "q")


def random_abox(
    rng: random.Random, tbox: Ontology, q: ConjunctiveQuery, sizes: Sizes = DEFAULT_SIZES
) -> DataInstance:
    """Random facts over the signature, plus (usually) part of an image of ``q``."""
    inds = [chr(ord("a") + i) for i in range(sizes.individuals)]
    concepts = sorted(tbox.concept_names | q.concept_names, key=natural_key) or ["A1"]
    roles = sorted(tbox.role_names | q.role_names, key=natural_key) or ["P1"]
    facts = set()
    for _ in range(sizes.facts):
        if rng.random() < 0.4:
            facts.add(Atom(rng.choice(concepts), (rng.choice(inds),)))
        else:
            facts.add(Atom(rng.choice(roles), (rng.choice(inds), rng.choice(inds))))
    if rng.random() < 0.7:
        h = {v: rng.choice(inds) for v in q.variables}
        keep = 1.0 if rng.random() < 0.5 else 0.6
        for atom in q.sorted_atoms():
            if rng.random() < keep:
                facts.add(Atom(atom.pred, tuple(h[v] for v in atom.args)))
    return DataInstance(facts)


def class_problems(cls: InstanceClass, tbox: Ontology, q: ConjunctiveQuery) -> list:
    """Reasons why ``(tbox, q)`` falls outside ``cls`` (empty when it is inside)."""
    problems = []
    shape = rewriter.query_shape(q)
    if cls.topology in ("tree", "leaves") and not (shape.tree_shaped and shape.connected):
        problems.append("query is not tree-shaped")
    if cls.topology == "leaves" and shape.leaf_count > cls.param:
        problems.append(f"query has {shape.leaf_count} leaves, more than {cls.param}")
    if cls.topology == "width":
        width, _ = rewriter.treewidth_and_decomposition(q)
        if width > cls.param:
            problems.append(f"query treewidth {width} exceeds {cls.param}")
    if not _depth_ok(tbox, cls.max_depth):
        depth = reasoner.format_depth(reasoner.ontology_depth(tbox))
        problems.append(f"ontology depth {depth} exceeds {cls.max_depth}")
    return problems


@dataclass(frozen=True)
class Instance:
    tbox: Ontology
    abox: DataInstance
    query: ConjunctiveQuery
    cls: str = ""
    seed: object = None

    def files(self) -> dict:
        """The three instance files, in the standard text formats."""
        return {
            "tbox.dl": print_ontology(self.tbox),
            "data.abox": print_data(self.abox),
            "query.cq": print_query(self.query),
        }


def random_instance(cls, seed, sizes: Sizes = DEFAULT_SIZES) -> Instance:
    """Seeded random knowledge base and query inside ``cls`` (a class name or InstanceClass)."""
    c = parse_class(cls) if isinstance(cls, str) else cls
    rng = _rng(seed)
    tbox = random_tbox(rng, c, sizes)
    q = random_query(rng, c, sizes)
    abox = random_abox(rng, tbox, q, sizes)
    problems = class_problems(c, tbox, q)
    if problems:
        raise ClassError(f"generated instance outside {c}: " + "; ".join(problems))
    return Instance(tbox, abox, q, c.name, seed)


def case_seed(seed: int, cls: str, i: int) -> str:
    return f"{seed}:{cls}:{i}"


# differential harness


def applicable_runs(inst: Instance, leaf_limit: int = 4, width_limit: int = 2) -> list:
    """(engine, strategy) pairs whose preconditions ``inst`` meets."""
    q, tbox = inst.query, inst.tbox
    depth = reasoner.ontology_depth(tbox)
    finite = depth != OMEGA
    shape = rewriter.query_shape(q)
    comps_tree = all(
        rewriter.query_shape(ConjunctiveQuery((), atoms)).tree_shaped for _, atoms in canonical.components(q)
    )
    width_ok = rewriter._width_at_most(q, width_limit)
    runs = [("pe", "generic"), ("ndl", "generic"), ("ndl", "auto"), ("pe", "auto")]
    if finite and depth <= 1 and width_ok:
        runs.append(("pe", "depth1"))
    if shape.tree_shaped and shape.leaf_count <= leaf_limit:
        runs.append(("ndl", "bounded-leaf"))
    if finite and width_ok:
        runs.append(("ndl", "btw"))
    if comps_tree:
        runs += [("tree", None), ("bl", None)]
    return runs


@dataclass
class CaseResult:
    instance: Instance
    expected: set
    runs: list = field(default_factory=list)  # (engine, strategy, answers)
    divergent: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.divergent


def check_instance(inst: Instance, debug: bool = False) -> CaseResult:
    expected = executor.answer(inst.tbox, inst.abox, inst.query, "brute")
    res = CaseResult(inst, expected)
    for engine, strategy in applicable_runs(inst):
        got = executor.answer(inst.tbox, inst.abox, inst.query, engine, strategy or "auto", debug=debug)
        res.runs.append((engine, strategy, got))
        if got != expected:
            res.divergent.append((engine, strategy, got))
    return res


def _format_answers(ans: set) -> str:
    return "{" + ", ".join("(" + ",".join(t) + ")" for t in sorted(ans)) + "}"


def describe_divergence(res: CaseResult) -> str:
    """Replayable report: the instance files and every disagreeing run."""
    lines = [f"divergence in class {res.instance.cls}, seed {res.instance.seed!r}"]
    lines.append(f"brute: {_format_answers(res.expected)}")
    for engine, strategy, got in res.divergent:
        tag = engine if strategy is None else f"{engine}/{strategy}"
        lines.append(f"{tag}: {_format_answers(got)}")
    for name, text in res.instance.files().items():
        lines.append(f"--- {name}")
        lines.append(text.rstrip("\n"))
    return "\n".join(lines)


def _selftest_case(args) -> CaseResult:
    cls, s, debug = args
    return check_instance(random_instance(cls, s), debug)


def selftest(seed: int, cases: int, cls: str, debug: bool = False, workers: int = 1):
    """Yield one CaseResult per generated case, in seed order."""
    jobs = [(cls, case_seed(seed, cls, i), debug) for i in range(cases)]
    if workers <= 1:
        yield from map(_selftest_case, jobs)
        return
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(workers) as pool:
        yield from pool.map(_selftest_case, jobs, chunksize=8)


# bench family


def bounded_leaf_family(size: int, leaves: int = 3) -> tuple:
    """Tree query with ``size`` atoms on ``leaves`` legs of near-equal length
    from a centre ``y0`` (a spider), over a fixed infinite-depth ontology;
    returns ``(tbox, q)``. Every atom is ``P1`` pointing away from the centre,
    so any end segment of a leg folds into the generated ``P1`` chain."""
    tbox = Ontology((
        ConceptIncl(AtomicConcept("A1"), ExistsRole(Role("P1"))),
        ConceptIncl(ExistsRole(Role("P1", True)), ExistsRole(Role("P1"))),
        RoleIncl(Role("P2"), Role("P1")),
        ConceptIncl(ExistsRole(Role("P1", True)), AtomicConcept("A2")),
    ))
    legs = [[] for _ in range(leaves)]
    for i in range(1, size + 1):
        legs[(i - 1) % leaves].append(i)
    atoms = []
    for leg in legs:
        prev = 0
        for v in leg:
            atoms.append(Atom("P1", (f"y{prev}", f"y{v}")))
            prev = v
    return tbox, ConjunctiveQuery((), atoms, "q")


def bench_facts() -> list:
    """Small data instance for timing rewritings of the bench family."""
    return [
        Atom("A1", ("a",)),
        Atom("P1", ("a", "b")),
        Atom("P2", ("b", "c")),
        Atom("P1", ("c", "a")),
    ]


def thgp_assignments(p: bp.HypergraphProgram):
    names = sorted(p.variables, key=natural_key)
    for bits in product((False, True), repeat=len(names)):
        yield dict(zip(names, bits))
