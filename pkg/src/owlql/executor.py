"""Evaluation of rewritings over data instances, and direct answering procedures.

Rewritings are evaluated over the data alone. The direct procedures search the
canonical model: :func:`tree_query` maps a tree-shaped query from its root down,
:func:`bl_query` does the same while keeping the anonymous part on a single
stack of roles.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from itertools import product
from typing import Iterable, Iterator

from . import canonical, reasoner, rewriter
from .rewriter import NdlProgram, PeAnd, PeAtom, PeEq, PeExists, PeOr, PeQuery, StrategyError
from .syntax import Atom, AtomicConcept, ConjunctiveQuery, DataInstance, Ontology, Role, natural_key

ENGINES = ("brute", "pe", "ndl", "tree", "bl")


def _edb(abox: DataInstance) -> dict:
    rel = defaultdict(set)
    for f in abox.facts:
        rel[f.pred].add(tuple(f.args))
    return rel


# datalog evaluation
#
# A stored tuple is a pattern: entries are constants (str) or class numbers (int)
# local to the tuple, and class k ranges over doms[k]. The guard predicate over
# all query variables thus stays a single pattern instead of |inds|^k tuples.


@dataclass(frozen=True)
class Pattern:
    entries: tuple
    doms: tuple = ()

    def expand(self) -> Iterator[tuple]:
        for pick in product(*(sorted(d, key=natural_key) for d in self.doms)):
            yield tuple(e if isinstance(e, str) else pick[e] for e in self.entries)


class _Env:
    """Variable bindings during one rule match: constants or domain-restricted classes."""

    __slots__ = ("val", "dom", "fwd", "next")

    def __init__(self, val=None, dom=None, fwd=None, nxt=0):
        self.val = val or {}
        self.dom = dom or {}
        self.fwd = fwd or {}
        self.next = nxt

    def copy(self) -> "_Env":
        return _Env(dict(self.val), dict(self.dom), dict(self.fwd), self.next)

    def resolve(self, t):
        while isinstance(t, int) and t in self.fwd:
            t = self.fwd[t]
        return t

    def new_class(self, dom: frozenset):
        if len(dom) == 1:
            return next(iter(dom))
        k = self.next
        self.next += 1
        self.dom[k] = dom
        return k

    def unify(self, a, b) -> bool:
        a, b = self.resolve(a), self.resolve(b)
        if a == b:
            return True
        if isinstance(a, str) and isinstance(b, str):
            return False
        if isinstance(a, str):
            a, b = b, a
        if isinstance(b, str):
            if b not in self.dom[a]:
                return False
            self.fwd[a] = b
            return True
        d = self.dom[a] & self.dom[b]
        if not d:
            return False
        if len(d) == 1:
            c = next(iter(d))
            self.fwd[a] = self.fwd[b] = c
        else:
            self.fwd[b] = a
            self.dom[a] = d
        return True


class _Relation:
    def __init__(self, patterns: Iterable[Pattern], arity: int):
        pats = set(patterns)
        if arity == 1:
            values = set()
            for p in pats:
                values.update(t[0] for t in p.expand())
            pats = {Pattern((0,), (frozenset(values),))} if values else set()
        self.patterns = sorted(pats, key=repr)
        self.arity = arity
        self._index = {}

    def candidates(self, pos: int, const: str) -> list:
        idx = self._index.get(pos)
        if idx is None:
            idx = ({}, [])
            for p in self.patterns:
                e = p.entries[pos]
                if isinstance(e, str):
                    idx[0].setdefault(e, []).append(p)
                else:
                    idx[1].append(p)
            self._index[pos] = idx
        return idx[0].get(const, []) + idx[1]


def _match(env: _Env, atom: Atom, pat: Pattern):
    env = env.copy()
    local = {}
    for var, e in zip(atom.args, pat.entries):
        if isinstance(e, str):
            t = e
        elif e in local:
            t = local[e]
        else:
            t = local[e] = env.new_class(pat.doms[e])
        cur = env.val.get(var)
        if cur is None:
            env.val[var] = t
        elif not env.unify(cur, t):
            return None
    return env


def _head_pattern(env: _Env, head: Atom) -> Pattern:
    entries, doms, renum = [], [], {}
    for v in head.args:
        t = env.resolve(env.val[v])
        if isinstance(t, str):
            entries.append(t)
        else:
            if t not in renum:
                renum[t] = len(doms)
                doms.append(env.dom[t])
            entries.append(renum[t])
    return Pattern(tuple(entries), tuple(doms))


def _eval_rule(rule, rels: dict) -> set:
    out = set()
    body = list(rule.body)

    def bound_count(a, env):
        return sum(isinstance(env.resolve(env.val.get(v)), str) for v in a.args if v in env.val)

    def rec(env, todo):
        if not todo:
            out.add(_head_pattern(env, rule.head))
            return
        # most constrained atom next, then smallest relation
        atom = max(
            todo,
            key=lambda a: (bound_count(a, env), sum(v in env.val for v in a.args), -len(rels[a.pred].patterns)),
        )
        rest = [a for a in todo if a is not atom]
        rel = rels[atom.pred]
        pats = rel.patterns
        for pos, v in enumerate(atom.args):
            t = env.resolve(env.val.get(v))
            if isinstance(t, str):
                pats = rel.candidates(pos, t)
                break
        for p in pats:
            nxt = _match(env, atom, p)
            if nxt is not None:
                rec(nxt, rest)

    if any(not rels[a.pred].patterns for a in body):
        return out
    rec(_Env(), body)
    return out


def eval_ndl(prog: NdlProgram, abox: DataInstance) -> set:
    """Goal tuples of a nonrecursive, safe program over the data."""
    prog.validate()
    edb = _edb(abox)
    rels = defaultdict(lambda: _Relation((), 1))
    for pred in prog.edb:
        tuples = edb.get(pred, set())
        arity = len(next(iter(tuples))) if tuples else 1
        rels[pred] = _Relation((Pattern(t) for t in tuples), arity)
    for pred in prog.strata():
        pats = set()
        for r in prog.rules_for(pred):
            pats |= _eval_rule(r, rels)
        rels[pred] = _Relation(pats, prog.arities[pred])
    out = set()
    for p in rels[prog.goal].patterns:
        out.update(p.expand())
    return out


def eval_ndl_naive(prog: NdlProgram, abox: DataInstance) -> set:
    """Reference evaluation: fixpoint over fully materialized relations."""
    prog.validate()
    rels = defaultdict(set, {k: set(v) for k, v in _edb(abox).items()})
    changed = True
    while changed:
        changed = False
        for r in prog.rules:
            found = set()

            def rec(i, env):
                if i == len(r.body):
                    found.add(tuple(env[v] for v in r.head.args))
                    return
                a = r.body[i]
                for t in rels[a.pred]:
                    if len(t) != len(a.args):
                        continue
                    e = dict(env)
                    if all(e.setdefault(v, c) == c for v, c in zip(a.args, t)):
                        rec(i + 1, e)

            rec(0, {})
            if not found <= rels[r.head.pred]:
                rels[r.head.pred] |= found
                changed = True
    return set(rels[prog.goal])


# positive existential evaluation


class _PeEval:
    def __init__(self, abox: DataInstance):
        self.rel = _edb(abox)
        self.inds = sorted(abox.inds, key=natural_key)
        self._index = {}

    def tuples(self, pred, pos, const):
        key = (pred, pos)
        if key not in self._index:
            idx = defaultdict(list)
            for t in self.rel.get(pred, ()):
                idx[t[pos]].append(t)
            self._index[key] = idx
        return self._index[key].get(const, [])

    def sat(self, node, env: dict) -> Iterator[dict]:
        if isinstance(node, PeAtom):
            bound = [(i, env[v]) for i, v in enumerate(node.args) if v in env]
            ts = self.tuples(node.pred, *bound[0]) if bound else self.rel.get(node.pred, ())
            for t in ts:
                if len(t) != len(node.args):
                    continue
                e = dict(env)
                if all(e.setdefault(v, c) == c for v, c in zip(node.args, t)):
                    yield e
            return
        if isinstance(node, PeEq):
            l, r = env.get(node.left), env.get(node.right)
            if l is not None and r is not None:
                if l == r:
                    yield env
            elif l is not None or r is not None:
                yield {**env, node.left: l or r, node.right: l or r}
            else:
                for a in self.inds:
                    yield {**env, node.left: a, node.right: a}
            return
        if isinstance(node, PeExists):
            inner = {k: v for k, v in env.items() if k not in node.vars}
            seen = set()
            for e in self.sat(node.child, inner):
                out = {k: v for k, v in e.items() if k not in node.vars}
                out.update((k, env[k]) for k in node.vars if k in env)
                key = frozenset(out.items())
                if key not in seen:
                    seen.add(key)
                    yield out
            return
        if isinstance(node, PeOr):
            seen = set()
            for c in node.children:
                for e in self.sat(c, env):
                    key = frozenset(e.items())
                    if key not in seen:
                        seen.add(key)
                        yield e
            return
        yield from self._conj(list(node.children), env)

    def _conj(self, todo: list, env: dict) -> Iterator[dict]:
        if not todo:
            yield env
            return

        def rank(c):
            if isinstance(c, PeAtom):
                return (0, -sum(v in env for v in c.args))
            if isinstance(c, PeEq):
                n = (c.left in env) + (c.right in env)
                return (1, 0) if n else (3, 0)
            return (2, 0)

        nxt = min(todo, key=rank)
        rest = [c for c in todo if c is not nxt]
        for e in self.sat(nxt, env):
            yield from self._conj(rest, e)


def eval_pe(phi: PeQuery, abox: DataInstance) -> set:
    """Answer tuples of a positive existential query over the data."""
    ev = _PeEval(abox)
    out = set()
    for e in ev.sat(phi.body, {}):
        free = [v for v in phi.answer_vars if v not in e]
        for pick in product(ev.inds, repeat=len(free)):
            full = {**e, **dict(zip(free, pick))}
            out.add(tuple(full[v] for v in phi.answer_vars))
    return out


# tree-shaped queries in the canonical model


class _TreePlan:
    """A connected tree-shaped query rooted at one variable."""

    def __init__(self, q: ConjunctiveQuery, root: str | None = None):
        shape = rewriter.query_shape(q)
        if not shape.tree_shaped or not shape.connected:
            raise StrategyError("direct procedures need a connected tree-shaped query")
        self.q = q
        graph = q.graph
        self.root = root if root is not None else rewriter.leaves(q)[0]
        if self.root not in graph:
            raise StrategyError(f"unknown root variable {self.root}")
        order = {v: i for i, v in enumerate(q.variables)}
        self.children = {v: [] for v in q.variables}
        self.parent = {self.root: None}
        todo = [self.root]
        while todo:
            u = todo.pop()
            for w in sorted(graph[u], key=order.__getitem__):
                if w not in self.parent:
                    self.parent[w] = u
                    self.children[u].append(w)
                    todo.append(w)
        self.unary = defaultdict(list)
        self.loops = defaultdict(list)
        self.roles = defaultdict(list)  # (parent, child) -> roles from parent to child
        for a in q.atoms:
            if a.is_unary:
                self.unary[a.args[0]].append(a.pred)
            elif a.args[0] == a.args[1]:
                self.loops[a.args[0]].append(a.pred)
            else:
                u, v = a.args
                if self.parent.get(v) == u:
                    self.roles[u, v].append(Role(a.pred))
                else:
                    self.roles[v, u].append(Role(a.pred, True))
        self.height = {}
        for v in reversed(list(self._preorder())):
            self.height[v] = 1 + max((self.height[c] for c in self.children[v]), default=-1)

    def _preorder(self):
        todo = [self.root]
        while todo:
            v = todo.pop()
            yield v
            todo.extend(reversed(self.children[v]))

    @property
    def eccentricity(self) -> int:
        return self.height[self.root]

    @property
    def edge_count(self) -> int:
        return len(self.q.variables) - 1


class _Checks:
    """MapCore and MapAnon for one query, candidate tuple and canonical model."""

    def __init__(self, plan: _TreePlan, view: canonical.ChaseView, b: tuple):
        self.plan = plan
        self.view = view
        self.answer = dict(zip(plan.q.answer_vars, b))
        if len(b) != len(plan.q.answer_vars):
            raise ValueError("candidate tuple has the wrong length")

    def map_core(self, v: str, a: str) -> bool:
        if v in self.answer and self.answer[v] != a:
            return False
        types = self.view.types.get(a)
        if types is None:
            return False
        e = (a, ())
        if any(not self.view.has_concept(c, e) for c in self.plan.unary[v]):
            return False
        roles = self.view.edge_roles.get((a, a), frozenset())
        return all(Role(p) in roles for p in self.plan.loops[v])

    def map_anon(self, v: str, last: Role) -> bool:
        if v in self.answer or self.plan.loops[v]:
            return False
        concepts = self.view.idx.concepts_of_anonymous(last)
        return all(AtomicConcept(c) in concepts for c in self.plan.unary[v])

    def fits_element(self, v: str, e) -> bool:
        a, word = e
        return self.map_core(v, a) if not word else self.map_anon(v, word[-1])

    def edge_ok(self, u, v, e1, e2) -> bool:
        return all(self.view.has_edge(e1, r, e2) for r in self.plan.roles[u, v])


def _root_candidates(view: canonical.ChaseView, depth: int) -> list:
    """Elements that can host the root of a query of the given eccentricity.

    If a homomorphism touches an individual, the root sits at most ``depth``
    below it. Otherwise the image lies under its topmost element, and shifting it
    to the shortest element with the same last role preserves the homomorphism.
    """
    anchors = [(a, ()) for a in view.individuals]
    anchors += sorted(view.realized_roles().values(), key=lambda e: (len(e[1]), e[1], e[0]))
    out, seen = [], set()
    layer = anchors
    for _ in range(depth + 1):
        nxt = []
        for e in layer:
            if e not in seen:
                seen.add(e)
                out.append(e)
                nxt.extend(view.children(e))
        layer = nxt
    return out


def _view(tbox, abox, q, view):
    return view or canonical.ChaseView(tbox, abox, canonical.default_bound(tbox, q))


def tree_query(
    tbox: Ontology,
    abox: DataInstance,
    q: ConjunctiveQuery,
    b: tuple,
    root: str | None = None,
    view: canonical.ChaseView | None = None,
) -> bool:
    """Is ``b`` a certain answer of the connected tree-shaped ``q``? Assumes consistency."""
    plan = _TreePlan(q, root)
    view = _view(tbox, abox, q, view)
    chk = _Checks(plan, view, tuple(b))
    memo = {}

    def fits(v, e) -> bool:
        key = (v, e)
        if key not in memo:
            memo[key] = chk.fits_element(v, e) and all(
                any(fits(c, e2) for e2 in _steps(view, plan, v, c, e)) for c in plan.children[v]
            )
        return memo[key]

    return any(fits(plan.root, e) for e in _root_candidates(view, plan.eccentricity))


def _steps(view, plan, v, c, e) -> list:
    roles = plan.roles[v, c]
    return [e2 for e2 in view.neighbors(e, roles[0]) if all(view.has_edge(e, r, e2) for r in roles[1:])]


# bounded-leaf search with a single stack


class InvariantViolation(AssertionError):
    pass


@dataclass(frozen=True)
class BLState:
    frontier: frozenset  # (v1, v2, c, n): v1 sits at c.stack[:n], child v2 still to map
    stack: tuple
    height: int
    done: int = 0  # frontier tuples removed so far

    @property
    def key(self):
        return (self.frontier, self.stack)


class BLQuery:
    """The stack-based procedure, determinized by depth-first search over its choices.

    ``initial``, ``option1``, ``option2`` and ``option3`` each perform one step and
    return the next state, or ``None`` where the procedure answers no.
    """

    def __init__(self, tbox, abox, q, b, root=None, view=None, debug=False):
        self.plan = _TreePlan(q, root)
        self.view = _view(tbox, abox, q, view)
        self.chk = _Checks(self.plan, self.view, tuple(b))
        self.bound = canonical.default_bound(tbox, q)
        self.idx = reasoner.index(tbox)
        self.debug = debug
        self.states_seen = 0
        self.max_done = 0

    # single steps

    def _children_tuples(self, v, c, n):
        return {(v, w, c, n) for w in self.plan.children[v]}

    def _pop_delta(self, frontier, stack, height):
        top = max((t[3] for t in frontier), default=0)
        return stack[:top], top

    def initial(self, a0: str, w0: tuple):
        if len(w0) > self.bound or a0 not in self.view.types:
            return None
        if not self.chk.fits_element(self.plan.root, (a0, w0)):
            return None
        h = len(w0)
        return self._check(BLState(frozenset(self._children_tuples(self.plan.root, a0, h)), tuple(w0), h))

    def option1(self, s: BLState, tup, d: str):
        v1, v2, c, n = tup
        if tup not in s.frontier or n != 0:
            return None
        if not self.chk.edge_ok(v1, v2, (c, ()), (d, ())) or not self.chk.map_core(v2, d):
            return None
        frontier = (s.frontier - {tup}) | self._children_tuples(v2, d, 0)
        return self._check(BLState(frontier, s.stack, s.height, s.done + 1))

    def option2(self, s: BLState, tup, role: Role):
        v1, v2, c, n = tup
        if tup not in s.frontier or n != s.height or s.height >= self.bound:
            return None
        here = (c, s.stack[: s.height])
        if (c, here[1] + (role,)) not in self.view.children(here):
            return None
        if any(not self.idx.entails_role(role, p) for p in self.plan.roles[v1, v2]):
            return None
        if not self.chk.map_anon(v2, role):
            return None
        frontier = s.frontier - {tup}
        if self.plan.children[v2]:
            stack = s.stack + (role,)
            frontier |= self._children_tuples(v2, c, s.height + 1)
            return self._check(BLState(frontier, stack, s.height + 1, s.done + 1))
        stack, height = self._pop_delta(frontier, s.stack, s.height)
        return self._check(BLState(frontier, stack, height, s.done + 1))

    def option3(self, s: BLState):
        if s.height == 0:
            return None
        deepest = {t for t in s.frontier if t[3] == s.height}
        frontier = s.frontier - deepest
        last = s.stack[-1]
        stack, height = s.stack[:-1], s.height - 1
        for v1, v2, c, _ in deepest:
            if height == 0 and not self.chk.map_core(v2, c):
                return None
            if height > 0 and not self.chk.map_anon(v2, stack[-1]):
                return None
            if any(not self.idx.entails_role(last.inv, p) for p in self.plan.roles[v1, v2]):
                return None
        if any(self.plan.children[t[1]] for t in deepest):
            for _, v2, c, _ in deepest:
                frontier |= self._children_tuples(v2, c, height)
        else:
            stack, height = self._pop_delta(frontier, stack, height)
        return self._check(BLState(frontier, stack, height, s.done + len(deepest)))

    # invariants

    def _check(self, s: BLState) -> BLState:
        self.states_seen += 1
        self.max_done = max(self.max_done, s.done)
        if not self.debug:
            return s
        if s.height != len(s.stack):
            raise InvariantViolation(f"height {s.height} but stack {s.stack}")
        ns = [t[3] for t in s.frontier]
        if any(n > s.height for n in ns):
            raise InvariantViolation("frontier tuple above the stack height")
        if ns and max(ns) != s.height:
            raise InvariantViolation("no frontier tuple at the stack height")
        if len({t[2] for t in s.frontier if t[3] > 0}) > 1:
            raise InvariantViolation("anonymous tuples hang off different individuals")
        if len({t[1] for t in s.frontier}) != len(s.frontier):
            raise InvariantViolation("a query edge is pending twice")
        if s.done > len(self.plan.q.atoms) or s.done + len(s.frontier) > self.plan.edge_count:
            raise InvariantViolation("more frontier removals than query edges")
        return s

    # search

    def successors(self, s: BLState) -> Iterator[BLState]:
        for tup in sorted(s.frontier):
            v1, v2, c, n = tup
            if n == 0:
                roles = self.plan.roles[v1, v2]
                for e in self.view.neighbors((c, ()), roles[0]):
                    if not e[1]:
                        nxt = self.option1(s, tup, e[0])
                        if nxt is not None:
                            yield nxt
            if n == s.height:
                here = (c, s.stack[: s.height])
                for child in self.view.children(here):
                    nxt = self.option2(s, tup, child[1][-1])
                    if nxt is not None:
                        yield nxt
        nxt = self.option3(s)
        if nxt is not None:
            yield nxt

    def initial_states(self) -> Iterator[BLState]:
        for a, w in _root_candidates(self.view, self.plan.eccentricity):
            s = self.initial(a, w)
            if s is not None:
                yield s

    def run(self) -> bool:
        failed = set()

        def accept(s: BLState) -> bool:
            if not s.frontier:
                return True
            if s.key in failed:
                return False
            if any(accept(n) for n in self.successors(s)):
                return True
            failed.add(s.key)
            return False

        return any(accept(s) for s in self.initial_states())


def bl_query(tbox, abox, q, b, root=None, view=None, debug=False) -> bool:
    """Is ``b`` a certain answer of the connected tree-shaped ``q``? Assumes consistency."""
    return BLQuery(tbox, abox, q, b, root, view, debug).run()


# dispatch


def _candidates(view: canonical.ChaseView, q: ConjunctiveQuery, v: str) -> list:
    """Individuals passing the unary and loop atoms on answer variable ``v``."""
    out = []
    for a in view.individuals:
        e = (a, ())
        if all(view.has_concept(x.pred, e) for x in q.atoms if x.is_unary and x.args[0] == v) and all(
            Role(x.pred) in view.edge_roles.get((a, a), ())
            for x in q.atoms
            if not x.is_unary and x.args == (v, v)
        ):
            out.append(a)
    return out


def answer(
    tbox: Ontology,
    abox: DataInstance,
    q: ConjunctiveQuery,
    engine: str = "brute",
    strategy: str = "auto",
    debug: bool = False,
    **rewrite_options,
) -> set:
    """Certain answers of ``q`` over ``(tbox, abox)`` by the chosen engine."""
    if engine not in ENGINES:
        raise ValueError(f"unknown engine {engine!r}")
    inds = sorted(abox.inds, key=natural_key)
    if not reasoner.is_consistent(tbox, abox):
        return set(product(inds, repeat=len(q.answer_vars)))
    if engine == "brute":
        return canonical.certain_answers_brute(tbox, abox, q)
    if engine in ("pe", "ndl"):
        r = rewriter.rewrite(q, tbox, engine, strategy, **rewrite_options)
        run = eval_pe if engine == "pe" else eval_ndl
        return run(r.program, abox)
    view = canonical.ChaseView(tbox, abox, canonical.default_bound(tbox, q))
    check = tree_query if engine == "tree" else (lambda *a, **k: bl_query(*a, debug=debug, **k))
    answer_set = set(q.answer_vars)
    parts, keys = [], []
    for vars_, atoms in canonical.components(q):
        avs = [v for v in vars_ if v in answer_set]
        sub = ConjunctiveQuery(tuple(avs), tuple(atoms), q.name)
        found = set()
        for b in product(*(_candidates(view, sub, v) for v in avs)):
            if check(tbox, abox, sub, b, view=view):
                found.add(b)
        if not found:
            return set()
        parts.append(found)
        keys.append(avs)
    out = set()
    for combo in product(*parts):
        val = {}
        for ks, vals in zip(keys, combo):
            val.update(zip(ks, vals))
        out.add(tuple(val[x] for x in q.answer_vars))
    return out
