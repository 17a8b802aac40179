import pytest
from hypothesis import given

from owlql.syntax import (
    Atom,
    ConceptIncl,
    ExistsRole,
    ParseError,
    Role,
    RoleDisj,
    parse_data,
    parse_ontology,
    parse_query,
    print_data,
    print_ontology,
    print_query,
)

from .strategies import data_instances, ontologies, queries, roles


def test_running_example_query(q0):
    assert q0.answer_vars == ("x1", "x2")
    assert len(q0.atoms) == 6
    assert len(q0.variables) == 7


def test_running_example_ontology(t0):
    assert len(t0) == 7
    assert ConceptIncl(ExistsRole(Role("P", True)), ExistsRole(Role("S"))) in t0.axioms


def test_role_disjointness_form():
    t = parse_ontology("P(x,y), R(x,y) -> false")
    assert t.axioms == (RoleDisj(Role("P"), Role("R")),)


def test_boolean_query():
    q = parse_query("q() :- A(y)")
    assert q.answer_vars == ()
    assert len(q.atoms) == 1


def test_duplicate_atoms_collapse():
    assert len(parse_query("q(x) :- A(x), A(x)").atoms) == 1


def test_empty_data():
    assert parse_data("").inds == frozenset()


def test_comments_and_blank_lines():
    t = parse_ontology("# c\n\nA(x) -> B(x)  # trailing\n")
    assert len(t) == 1


@pytest.mark.parametrize(
    "text",
    ["A(x) -> ", "A(x) => B(x)", "A(x,y,z) -> B(x)", "P(x,y) -> A(x)\nP(x) -> B(x)"],
)
def test_malformed_ontology(text):
    with pytest.raises(ParseError) as err:
        parse_ontology(text)
    assert err.value.line >= 1 and err.value.column >= 1


def test_query_answer_variable_must_occur():
    with pytest.raises((ParseError, ValueError)):
        parse_query("q(z) :- A(x)")


@given(roles())
def test_inverse_is_involution(r):
    assert r.inv.inv == r
    assert r.inv != r


@given(ontologies())
def test_ontology_round_trip(t):
    assert set(parse_ontology(print_ontology(t)).axioms) == set(t.axioms)


@given(data_instances())
def test_data_round_trip(a):
    assert parse_data(print_data(a)) == a


@given(queries())
def test_query_round_trip(q):
    back = parse_query(print_query(q))
    assert back.answer_vars == q.answer_vars
    assert back.atoms == q.atoms


def test_atom_str():
    assert str(Atom("P", ("x", "y"))) == "P(x,y)"
