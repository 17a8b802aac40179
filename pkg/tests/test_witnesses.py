from hypothesis import given, settings
from hypothesis import strategies as st

from owlql import canonical, executor, genlab, reasoner
from owlql.canonical import InconsistentKB
from owlql.syntax import Atom, ConceptDisj, DataInstance, Ontology, Role, RoleDisj
from owlql.witnesses import (
    enumerate_tree_witnesses,
    independent,
    independent_subsets,
    witness_atoms,
)

from .oracles import subsets, witnesses_by_subsets
from .strategies import ontologies, queries

P, S, T = Role("P"), Role("S"), Role("T")


def _by_interior(ts):
    return {frozenset(t.interior): t for t in ts}


def test_running_example_witnesses(t0, q0):
    ts = _by_interior(enumerate_tree_witnesses(q0, t0))
    assert len(ts) == 3
    t1 = ts[frozenset({"y1", "y3", "y4", "y5"})]
    assert t1.roots == {"y2", "x2"} and t1.generators == {P}
    t2 = ts[frozenset({"y3", "y5"})]
    assert t2.roots == {"y1", "y4"} and t2.generators == {S}
    t3 = ts[frozenset({"y5"})]
    assert t3.roots == {"y3"} and t3.generators == {T.inv}
    assert t3.atoms == {Atom("T", ("y5", "y3"))}


def test_running_example_independence(t0, q0):
    ts = _by_interior(enumerate_tree_witnesses(q0, t0))
    t1 = ts[frozenset({"y1", "y3", "y4", "y5"})]
    t2 = ts[frozenset({"y3", "y5"})]
    t3 = ts[frozenset({"y5"})]
    assert not independent([t2, t3])
    assert not independent([t1, t2])
    assert independent([])
    assert all(independent([t]) for t in ts.values())
    # only the empty set and the singletons
    assert len(independent_subsets(list(ts.values()))) == 4


def test_witness_atoms_skip_root_only_atoms(q0):
    got = witness_atoms(q0, {"y1", "y4"}, {"y3", "y5"})
    assert got == {Atom("S", ("y1", "y3")), Atom("S", ("y4", "y3")), Atom("T", ("y5", "y3"))}


def _generatable_by_chase(t):
    """Last roles of anonymous words over all one-fact data instances."""
    depth = 2 * len(t.role_names) + 2
    starts = [DataInstance({Atom(c, ("a",))}) for c in t.concept_names]
    starts += [DataInstance({Atom(r, ("a", "b"))}) for r in t.role_names]
    out = set()
    for a in starts:
        try:
            m = canonical.build_canonical(t, a, depth)
        except InconsistentKB:
            continue
        out |= {e[1][-1] for e in m.anonymous}
    return out


def _connected(q, vs):
    vs = set(vs)
    seen, todo = set(), [min(vs)]
    while todo:
        v = todo.pop()
        if v in seen:
            continue
        seen.add(v)
        todo += [u for u in q.graph[v] if u in vs]
    return seen == vs


@settings(max_examples=60, deadline=None)
@given(ontologies(max_axioms=5, disjointness=False), queries(max_atoms=4))
def test_witnesses_match_subset_enumeration(t, q):
    gen_roles = _generatable_by_chase(t)
    depth = max(1, q.size)
    expected = {
        k: gens & gen_roles
        for k, gens in witnesses_by_subsets(
            q, t, lambda r: canonical.build_generator_model(t, r, depth)
        ).items()
        if gens & gen_roles and _connected(q, k[1])
    }
    got = {(tw.roots, tw.interior): set(tw.generators) for tw in enumerate_tree_witnesses(q, t)}
    assert got == expected


@settings(max_examples=40, deadline=None)
@given(ontologies(max_axioms=5, disjointness=False), queries(max_atoms=4))
def test_independent_subsets_are_exactly_the_independent_ones(t, q):
    ts = enumerate_tree_witnesses(q, t)
    got = {frozenset(s) for s in independent_subsets(ts)}
    want = {frozenset(s) for s in subsets(range(len(ts))) if independent([ts[i] for i in s])}
    assert got == want


@settings(max_examples=40, deadline=None)
@given(ontologies(max_axioms=5, disjointness=False), queries(max_atoms=4))
def test_witness_shape(t, q):
    for tw in enumerate_tree_witnesses(q, t):
        assert tw.interior and not tw.interior & set(q.answer_vars)
        assert not tw.roots & tw.interior
        assert tw.generators
        assert tw.atoms == witness_atoms(q, tw.roots, tw.interior)
        # every atom touching the interior belongs to the witness
        assert {a for a in q.atoms if set(a.args) & tw.interior} == tw.atoms
        assert reasoner.index(t).generatable_roles >= tw.generators


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from(["trees", "btw", "arbitrary"]))
def test_generated_instances_match_subset_enumeration(seed, cls):
    inst = genlab.random_instance(genlab.parse_class(cls), seed, genlab.Sizes(query_vars=(3, 5)))
    t, q = inst.tbox, inst.query
    t = Ontology(tuple(ax for ax in t.axioms if not isinstance(ax, (ConceptDisj, RoleDisj))))
    gen_roles = _generatable_by_chase(t)
    depth = max(1, q.size)
    expected = {
        k: gens & gen_roles
        for k, gens in witnesses_by_subsets(
            q, t, lambda r: canonical.build_generator_model(t, r, depth)
        ).items()
        if gens & gen_roles and _connected(q, k[1])
    }
    got = {(tw.roots, tw.interior): set(tw.generators) for tw in enumerate_tree_witnesses(q, t)}
    assert got == expected


def test_extra_label_on_y1_changes_nothing(t0, a0, q0):
    labelled = q0.with_atoms(q0.atoms | {Atom("B", ("y1",))})

    def keys(q):
        return {(tw.roots, tw.interior) for tw in enumerate_tree_witnesses(q, t0)}

    assert keys(labelled) == keys(q0)
    assert executor.answer(t0, a0, labelled) == {("c", "a")}
