"""Hypothesis strategies for small ontologies, data instances and queries."""

from hypothesis import strategies as st

from owlql.syntax import (
    Atom,
    AtomicConcept,
    ConceptDisj,
    ConceptIncl,
    ConjunctiveQuery,
    DataInstance,
    ExistsRole,
    Ontology,
    Role,
    RoleDisj,
    RoleIncl,
)

CONCEPTS = ("A", "B", "C")
ROLES = ("P", "R", "S")
INDS = ("a", "b", "c")
VARS = ("x", "y", "z", "u", "v")


def roles(names=ROLES):
    return st.builds(Role, st.sampled_from(names), st.booleans())


def basic_concepts(concepts=CONCEPTS, role_names=ROLES):
    return st.one_of(
        st.builds(AtomicConcept, st.sampled_from(concepts)),
        st.builds(ExistsRole, roles(role_names)),
    )


def axioms(concepts=CONCEPTS, role_names=ROLES, disjointness=True):
    c = basic_concepts(concepts, role_names)
    r = roles(role_names)
    kinds = [st.builds(ConceptIncl, c, c), st.builds(RoleIncl, r, r)]
    if disjointness:
        kinds += [st.builds(ConceptDisj, c, c), st.builds(RoleDisj, r, r)]
    return st.one_of(*kinds)


def ontologies(max_axioms=5, disjointness=True, concepts=CONCEPTS, role_names=ROLES):
    return st.lists(axioms(concepts, role_names, disjointness), max_size=max_axioms).map(
        lambda xs: Ontology(tuple(dict.fromkeys(xs)))
    )


def facts(concepts=CONCEPTS, role_names=ROLES, inds=INDS):
    return st.one_of(
        st.builds(lambda p, a: Atom(p, (a,)), st.sampled_from(concepts), st.sampled_from(inds)),
        st.builds(lambda p, a, b: Atom(p, (a, b)), st.sampled_from(role_names),
                  st.sampled_from(inds), st.sampled_from(inds)),
    )


def data_instances(max_facts=6, **kw):
    return st.lists(facts(**kw), max_size=max_facts).map(DataInstance)


def query_atoms(vars_=VARS, concepts=CONCEPTS, role_names=ROLES):
    return st.one_of(
        st.builds(lambda p, x: Atom(p, (x,)), st.sampled_from(concepts), st.sampled_from(vars_)),
        st.builds(lambda p, x, y: Atom(p, (x, y)), st.sampled_from(role_names),
                  st.sampled_from(vars_), st.sampled_from(vars_)),
    )


@st.composite
def queries(draw, max_atoms=4, max_answer=2, vars_=VARS):
    atoms = draw(st.lists(query_atoms(vars_), min_size=1, max_size=max_atoms))
    used = sorted({v for a in atoms for v in a.args})
    k = draw(st.integers(0, min(max_answer, len(used))))
    answer = draw(st.permutations(used))[:k]
    return ConjunctiveQuery(tuple(answer), frozenset(atoms), "q")
