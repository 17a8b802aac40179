from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from owlql import boolprog as bp
from owlql import canonical, genlab, reasoner
from owlql import rewriter as rw
from owlql.syntax import Role, parse_data, parse_ontology, parse_query

from .oracles import assignments

seeds = st.integers(0, 10**6)


def example_program(label=bp.ZERO):
    sk = bp.Skeleton(
        ("v1", "v2", "v3", "v4", "v5", "v6"),
        (("v1", "v2"), ("v2", "v3"), ("v2", "v6"), ("v3", "v4"), ("v4", "v5")),
    )
    names = ("v1v2", "v2v3", "v2v6", "v3v4", "v4v5")
    base = bp.HypergraphProgram(names, (), (label,) * 5, sk)
    return bp.HypergraphProgram(names, (base.interval("v1", "v4", "v6"),), base.labels, sk)


def roles_between(model, e1, e2):
    out = set()
    for name, pairs in model.binary_ext.items():
        if (e1, e2) in pairs:
            out.add(str(Role(name)))
        if (e2, e1) in pairs:
            out.add(str(Role(name, True)))
    return out


def test_example_program_reduction():
    red = genlab.thgp_to_query_ontology(example_program())
    q, t = red.query, red.tbox
    assert len(q.atoms) == 10
    assert set(q.variables) == {"y1", "y2", "y3", "y4", "y5", "y6", "y1_2", "y2_3", "y2_6", "y3_4", "y4_5"}
    assert reasoner.ontology_depth(t) == 2
    m = canonical.build_generator_model(t, Role("Re1"), 3)
    a, d1 = ("a", ()), ("a", (Role("Re1"),))
    d2 = next(e for e in m.anonymous if len(e[1]) == 2)
    assert len(m.anonymous) == 2
    assert roles_between(m, a, d1) == {"Re1", "S1_2", "Sp3_4-", "Sp2_6-"}
    assert roles_between(m, d1, d2) == {"Rpe1", "Sp1_2", "S2_3-", "Sp2_3", "S3_4-", "S2_6-"}


def test_reduction_without_hyperedges():
    p = example_program(bp.Label.conj(["x"]))
    bare = bp.HypergraphProgram(p.vertices, (), p.labels, p.skeleton)
    red = genlab.thgp_to_query_ontology(bare)
    assert red.tbox.axioms == ()
    for x in (False, True):
        assert rw.f_prim(red.query, red.tbox, red.gamma({"x": x})) == x


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_primitive_function_of_the_reduction(seed):
    p = genlab.random_thgp(seed, n_tree_vertices=6, n_hyperedges=3, n_vars=4)
    red = genlab.thgp_to_query_ontology(p)
    assert len(p.variables) <= 6
    for a in assignments(p.variables):
        assert bp.eval_hgp(p, a) == rw.f_prim(red.query, red.tbox, red.gamma(a))


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_reduction_shape(seed):
    p = genlab.random_thgp(seed, n_tree_vertices=7, n_hyperedges=2)
    red = genlab.thgp_to_query_ontology(p)
    depth = reasoner.ontology_depth(red.tbox)
    assert (depth == 2) == bool(p.hyperedges)
    assert rw.query_shape(red.query).leaf_count == len(p.skeleton.leaves)


# circuits to linear queries


def test_sample_circuit_reduction():
    c = genlab.sample_circuit()
    assert genlab.normal_form_problems(c) == []
    assert bp.eval_circuit(c, genlab.input_assignment(c, "10000"))
    outcomes = set()
    for n in range(32):
        bits = format(n, "05b")
        red = genlab.circuit_to_linear_query(c, bits)
        accepted = bp.eval_circuit(c, genlab.input_assignment(c, bits))
        entailed = ("a",) in canonical.certain_answers_brute(red.tbox, red.abox, red.query)
        assert entailed == accepted, bits
        outcomes.add(accepted)
    # rejecting inputs are covered too
    assert outcomes == {False, True}


def test_single_and_circuit():
    c = genlab.normalize_circuit(
        bp.MonotoneCircuit((bp.Gate("input", (), "x1"), bp.Gate("input", (), "x2"), bp.Gate("and", (0, 1))), 2)
    )
    assert len(genlab.linear_word(1)) == 8
    for bits in ("00", "01", "10", "11"):
        red = genlab.circuit_to_linear_query(c, bits)
        entailed = ("a",) in canonical.certain_answers_brute(red.tbox, red.abox, red.query)
        assert entailed == (bits == "11")


def test_word_lengths():
    assert genlab.word_length(0) == 0
    for d in range(1, 6):
        assert genlab.word_length(d) == 2 * genlab.word_length(d - 1) + 8
        assert len(genlab.linear_word(d)) == genlab.word_length(d)
        assert rw.query_shape(genlab.linear_query(d)).leaf_count == 2


def test_reduction_rejects_other_shapes():
    c = bp.MonotoneCircuit((bp.Gate("input", (), "x1"), bp.Gate("input", (), "x2"), bp.Gate("or", (0, 1))), 2)
    with pytest.raises(Exception):
        genlab.circuit_to_linear_query(c, "00")


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(1, 3))
def test_linear_reduction_matches_the_circuit(seed, levels):
    c = genlab.random_normal_circuit(seed, and_levels=levels, width=3, n_vars=5)
    for a in assignments(c.variables):
        bits = "".join("1" if a[v] else "0" for v in sorted(c.variables, key=lambda v: int(v[1:])))
        red = genlab.circuit_to_linear_query(c, a)
        entailed = ("a",) in canonical.certain_answers_brute(red.tbox, red.abox, red.query)
        assert entailed == bp.eval_circuit(c, a), bits
        assert rw.query_shape(red.query).leaf_count == 2


def test_normal_circuit_is_kept():
    c = genlab.sample_circuit()
    n = genlab.normalize_circuit(c)
    assert n.size == c.size
    for a in assignments(c.variables):
        assert bp.eval_circuit(n, a) == bp.eval_circuit(c, a)


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_normalize_preserves_function(seed):
    c = genlab.random_circuit(seed, n_vars=4, n_gates=8)
    n = genlab.normalize_circuit(c)
    assert genlab.normal_form_problems(n) == []
    for a in assignments(c.variables):
        assert bp.eval_circuit(n, a) == bp.eval_circuit(c, a)


# random instances


def test_linear_class_has_two_leaves():
    inst = genlab.random_instance(genlab.parse_class("linear"), 1)
    assert rw.query_shape(inst.query).leaf_count == 2


def test_depth_class_bounds_depth():
    inst = genlab.random_instance(genlab.parse_class("depth(2)"), 7)
    d = reasoner.ontology_depth(inst.tbox)
    assert d != reasoner.OMEGA and d <= 2


def test_unknown_class():
    with pytest.raises(genlab.ClassError):
        genlab.parse_class("spiral")


def test_instances_are_reproducible_and_replayable():
    cls = genlab.parse_class("trees")
    a, b = genlab.random_instance(cls, 5), genlab.random_instance(cls, 5)
    assert a.files() == b.files()
    files = a.files()
    assert parse_ontology(files["tbox.dl"]).axioms == a.tbox.axioms
    assert parse_data(files["data.abox"]) == a.abox
    assert parse_query(files["query.cq"]).atoms == a.query.atoms


@pytest.mark.parametrize("cls", ["trees", "bounded-leaf(4)", "linear", "btw(2)", "depth(1)", "arbitrary"])
def test_instances_are_in_their_class(cls):
    c = genlab.parse_class(cls)
    for seed in range(40):
        inst = genlab.random_instance(c, seed)
        assert genlab.class_problems(c, inst.tbox, inst.query) == []


def test_nonempty_answers_are_common():
    counts = Counter()
    for seed in range(1000):
        inst = genlab.random_instance(genlab.parse_class("trees"), seed)
        counts[bool(canonical.certain_answers_brute(inst.tbox, inst.abox, inst.query))] += 1
    assert counts[True] >= 300


@pytest.mark.parametrize("cls", genlab.SELFTEST_CLASSES)
def test_short_selftest(cls):
    results = list(genlab.selftest(3, 20, cls))
    assert len(results) == 20
    assert all(r.ok for r in results), [genlab.describe_divergence(r) for r in results if not r.ok]
