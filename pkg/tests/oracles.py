"""Independent reference implementations used only by the tests.

Each oracle follows a definition directly, by exhaustive enumeration, and
shares no code with the package beyond the data classes.
"""

from __future__ import annotations

from itertools import chain, combinations, product

from owlql import boolprog as bp
from owlql.syntax import (
    AtomicConcept,
    ConceptDisj,
    ConceptIncl,
    ExistsRole,
    Role,
    RoleIncl,
)


def subsets(xs):
    xs = list(xs)
    return chain.from_iterable(combinations(xs, k) for k in range(len(xs) + 1))


# entailment by naive rule saturation


class Saturation:
    """Told subsumptions closed under the inclusion rules, to a fixpoint (no disjointness)."""

    def __init__(self, tbox):
        roles = set()
        concepts = set()
        for ax in tbox.axioms:
            for x in (getattr(ax, "lhs", None), getattr(ax, "rhs", None),
                      getattr(ax, "first", None), getattr(ax, "second", None)):
                if isinstance(x, Role):
                    roles |= {x, x.inv}
                elif isinstance(x, ExistsRole):
                    roles |= {x.role, x.role.inv}
                elif isinstance(x, AtomicConcept):
                    concepts.add(x)
        self.roles = roles
        self.concepts = concepts | {ExistsRole(r) for r in roles}
        rsub = {(r, r) for r in roles}
        csub = {(c, c) for c in self.concepts}
        for ax in tbox.axioms:
            if isinstance(ax, RoleIncl):
                rsub |= {(ax.lhs, ax.rhs), (ax.lhs.inv, ax.rhs.inv)}
            elif isinstance(ax, ConceptIncl):
                csub.add((ax.lhs, ax.rhs))
        changed = True
        while changed:
            changed = False
            new = {(a, c) for a, b in rsub for b2, c in rsub if b == b2} - rsub
            new |= {(a.inv, b.inv) for a, b in rsub} - rsub
            if new:
                rsub |= new
                changed = True
            cnew = {(a, c) for a, b in csub for b2, c in csub if b == b2}
            cnew |= {(ExistsRole(r), ExistsRole(s)) for r, s in rsub}
            cnew -= csub
            if cnew:
                csub |= cnew
                changed = True
        self.rsub = rsub
        self.csub = csub

    def role(self, r, s) -> bool:
        return r == s or (r, s) in self.rsub

    def concept(self, c, d) -> bool:
        return c == d or (c, d) in self.csub


# finite-model consistency check


def consistent_by_models(tbox, abox, domain: int = 3) -> bool:
    """Is there a model with at most ``domain`` elements (individuals first, not necessarily distinct)?

    Only single-role signatures are supported; extensions are bit masks.
    """
    concepts = sorted(tbox.concept_names | abox.concept_names)
    roles = sorted(tbox.role_names | abox.role_names)
    assert len(roles) <= 1, "oracle supports one role name"
    inds = sorted(abox.inds)
    n = domain
    cells = [(i, j) for i in range(n) for j in range(n)]

    def dom(mask):
        out = 0
        for k in range(n * n):
            if mask >> k & 1:
                out |= 1 << cells[k][0]
        return out

    def transpose(mask):
        out = 0
        for k in range(n * n):
            if mask >> k & 1:
                i, j = cells[k]
                out |= 1 << (j * n + i)
        return out

    role_masks = range(1 << (n * n)) if roles else [0]
    for ind_map in product(range(n), repeat=len(inds)):
        place = dict(zip(inds, ind_map))
        for rm in role_masks:
            ext_r = {}
            if roles:
                ext_r = {Role(roles[0]): rm, Role(roles[0], True): transpose(rm)}
            d = {r: 0 for r in ext_r}
            for r, m in ext_r.items():
                d[r] = dom(m)
            ok = True
            for f in abox.facts:
                if not f.is_unary:
                    a, b = place[f.args[0]], place[f.args[1]]
                    if not rm >> (a * n + b) & 1:
                        ok = False
            if not ok:
                continue
            for cm in product(range(1 << n), repeat=len(concepts)):
                ext_c = dict(zip(concepts, cm))

                def ext(c):
                    if isinstance(c, AtomicConcept):
                        return ext_c[c.name]
                    return d[c.role]

                if any(f.is_unary and not ext_c[f.pred] >> place[f.args[0]] & 1 for f in abox.facts):
                    continue
                good = True
                for ax in tbox.axioms:
                    if isinstance(ax, ConceptIncl):
                        good = ext(ax.lhs) & ~ext(ax.rhs) == 0
                    elif isinstance(ax, ConceptDisj):
                        good = ext(ax.first) & ext(ax.second) == 0
                    elif isinstance(ax, RoleIncl):
                        good = ext_r[ax.lhs] & ~ext_r[ax.rhs] == 0
                    else:
                        good = ext_r[ax.first] & ext_r[ax.second] == 0
                    if not good:
                        break
                if good:
                    return True
    return False


# homomorphisms by tuple enumeration


def homomorphisms_by_tuples(q, model):
    vs = list(q.variables)
    elems = list(model.elements)
    out = []
    for vals in product(elems, repeat=len(vs)):
        h = dict(zip(vs, vals))
        if all(_holds(model, a, h) for a in q.atoms):
            out.append(h)
    return out


def _holds(model, atom, h):
    if atom.is_unary:
        return model.has_concept(atom.pred, h[atom.args[0]])
    return model.has_edge(h[atom.args[0]], Role(atom.pred), h[atom.args[1]])


# tree witnesses by subset enumeration


def witnesses_by_subsets(q, tbox, generator_model):
    """All (roots, interior) -> generator sets, following the definition.

    ``generator_model(role)`` returns a materialized generator model whose root
    is ``("a", ())``.
    """
    answer = set(q.answer_vars)
    evars = [v for v in q.variables if v not in answer]
    roles = set()
    for ax in tbox.axioms:
        for x in (getattr(ax, "lhs", None), getattr(ax, "rhs", None)):
            if isinstance(x, Role):
                roles |= {x, x.inv}
            elif isinstance(x, ExistsRole):
                roles |= {x.role, x.role.inv}
    models = {r: generator_model(r) for r in sorted(roles)}
    out = {}
    for interior in subsets(evars):
        if not interior:
            continue
        ti = set(interior)
        touching = [a for a in q.atoms if set(a.args) & ti]
        tr = {v for a in touching for v in a.args} - ti
        qt = [a for a in q.atoms if set(a.args) <= tr | ti and not set(a.args) <= tr]
        if set(qt) != set(touching):
            continue
        gens = set()
        for r, m in models.items():
            root = ("a", ())
            anon = [e for e in m.elements if e[1] and e[1][0] == r]
            vs = sorted(ti)
            for vals in product(anon, repeat=len(vs)):
                h = dict(zip(vs, vals))
                h.update({v: root for v in tr})
                if all(_holds(m, a, h) for a in qt):
                    gens.add(r)
                    break
        if gens:
            out[(frozenset(tr), frozenset(ti))] = gens
    return out


# Boolean programs


def formula_of_circuit(c: bp.MonotoneCircuit, i: int | None = None):
    """Full tree expansion of a circuit into a formula."""
    g = c.gates[c.output if i is None else i]
    if g.op == "input":
        if g.var.startswith("!"):
            return ("not", g.var[1:])
        return ("var", g.var)
    return (g.op, tuple(formula_of_circuit(c, j) for j in g.inputs))


def eval_expansion(f, a) -> bool:
    kind, arg = f
    if kind == "var":
        return bool(a[arg])
    if kind == "not":
        return not a[arg]
    vals = [eval_expansion(x, a) for x in arg]
    return all(vals) if kind == "and" else any(vals)


def nbp_by_paths(p: bp.Nbp, a) -> bool:
    """Some simple s-t path of at most |V| edges with every label true."""
    if p.s == p.t:
        return True
    n = len(p.vertices)

    def walk(v, seen, k):
        if k > n:
            return False
        for x, y, lab in p.edges:
            if x == v and y not in seen and lab.value(a):
                if y == p.t or walk(y, seen | {y}, k + 1):
                    return True
        return False

    return walk(p.s, {p.s}, 1)


def hgp_by_subsets(p: bp.HypergraphProgram, a) -> bool:
    """Some pairwise-disjoint set of hyperedges covers every vertex labelled 0."""
    zeros = {v for v, lab in zip(p.vertices, p.labels) if not lab.value(a)}
    for es in subsets(p.hyperedges):
        covered = set()
        ok = True
        for e in es:
            if covered & e:
                ok = False
                break
            covered |= e
        if ok and zeros <= covered:
            return True
    return False


def assignments(names):
    names = sorted(names)
    for bits in product((False, True), repeat=len(names)):
        yield dict(zip(names, bits))


# datalog by naive fixpoint over the active domain


def naive_datalog(prog, abox):
    dom = sorted(abox.inds)
    facts = {}
    for f in abox.facts:
        facts.setdefault(f.pred, set()).add(tuple(f.args))
    changed = True
    while changed:
        changed = False
        for rule in prog.rules:
            vs = sorted({v for a in (rule.head, *rule.body) for v in a.args})
            for vals in product(dom, repeat=len(vs)):
                h = dict(zip(vs, vals))
                if all(tuple(h[v] for v in a.args) in facts.get(a.pred, ()) for a in rule.body):
                    t = tuple(h[v] for v in rule.head.args)
                    if t not in facts.setdefault(rule.head.pred, set()):
                        facts[rule.head.pred].add(t)
                        changed = True
    return facts.get(prog.goal, set())
