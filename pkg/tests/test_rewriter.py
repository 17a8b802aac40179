import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from owlql import boolprog as bp
from owlql import canonical, executor, genlab, reasoner
from owlql import rewriter as rw
from owlql.rewriter import PeAtom, PeExists, PeOr, StrategyError, TwVariable
from owlql.syntax import Atom, ConjunctiveQuery, DataInstance, Ontology, parse_data, parse_ontology, parse_query

from .oracles import assignments

seeds = st.integers(0, 10**6)
small = genlab.Sizes(query_vars=(3, 5))


def _h0_assignment(q0, t0):
    """Variables made true by the homomorphism drawn for (c, a): atoms it maps to
    data, and the witness covering the rest."""
    ctx = rw.context(q0, t0)
    big = next(i for i, t in enumerate(ctx.witnesses) if len(t.interior) == 4)
    on = {TwVariable.atom(Atom("R", ("y2", "x1"))).name, TwVariable.witness(big).name}
    return on


def test_atom_rewritings(t0):
    assert rw.atom_rewriting(t0, Atom("R", ("u", "v"))) == PeOr(
        (PeAtom("P", ("u", "v")), PeAtom("R", ("u", "v")))
    )
    assert rw.atom_rewriting(t0, Atom("B", ("u",))) == PeOr(
        (PeAtom("B", ("u",)), PeExists(("w",), PeAtom("P", ("w", "u"))))
    )
    assert rw.atom_rewriting(Ontology(), Atom("R", ("u", "v"))) == PeAtom("R", ("u", "v"))


def test_witness_function_disjuncts(t0, q0):
    # empty set plus three singletons: every pair of witnesses overlaps
    assert len(rw.f_tw(q0, t0).children) == 4
    assert len(rw.f_tw_prime(q0, t0).children) == 4


def test_witness_function_without_witnesses():
    q = parse_query("q(x) :- R(x,y), A(y)")
    f = rw.f_tw(q, Ontology())
    assert len(f.children) == 1
    assert bp.formula_vars(f) == {"p.R.x.y", "p.A.y"}


def test_witness_functions_accept_the_drawn_homomorphism(t0, q0):
    on = _h0_assignment(q0, t0)
    f = rw.f_tw(q0, t0)
    assert bp.eval_formula(f, {v: v in on for v in bp.formula_vars(f)})
    # spelled out: the big witness needs y2 = x2 (joined by U after folding) and P at every variable
    ctx = rw.context(q0, t0)
    big = next(t for t in ctx.witnesses if len(t.interior) == 4)
    g = rw.f_tw_prime(q0, t0)
    on2 = {TwVariable.atom(Atom("R", ("y2", "x1"))).name}
    on2 |= {TwVariable.eq(a, b).name for a, b in rw.witness_equalities(big)}
    on2 |= {TwVariable.gen(z, r).name for z in big.variables for r in big.generators}
    assert bp.eval_formula(g, {v: v in on2 for v in bp.formula_vars(g)})
    assert not bp.eval_formula(g, {v: False for v in bp.formula_vars(g)})


def test_prim_constants(q0, t0):
    preds = rw.prim_predicates(q0, t0)
    assert not rw.f_prim(q0, t0, {p: False for p in preds})
    assert rw.f_prim(q0, t0, {p: True for p in preds})


def test_running_example_rewritings(t0, a0, q0):
    for mode, strategy in [("pe", "generic"), ("ndl", "generic"), ("ndl", "bounded-leaf"), ("ndl", "btw")]:
        r = rw.rewrite(q0, t0, mode, strategy)
        run = executor.eval_pe if mode == "pe" else executor.eval_ndl
        assert run(r.program, a0) == {("c", "a")}, strategy


def test_single_atom_program_without_ontology():
    q = parse_query("q(x) :- A(x)")
    prog = rw.rewrite(q, Ontology(), "ndl", "generic").program
    assert prog.problems() == []
    c = rw.rewriting_to_boolfn(prog)
    assert [bp.eval_circuit(c, {"A": v}) for v in (False, True)] == [False, True]


def test_boolfn_of_trivial_rewritings():
    assert rw.rewriting_to_boolfn(rw.parse_pe("q(x) :- A(x)")) == bp.Var("A")
    prog = rw.parse_ndl("% goal: goal/1\ngoal(X) :- A(X).\n")
    c = rw.rewriting_to_boolfn(prog)
    assert bp.eval_circuit(c, {"A": True}) and not bp.eval_circuit(c, {"A": False})


def test_nbp_without_witnesses_is_the_conjunction():
    q = parse_query("q(x) :- R(x,y), S(y,z), A(z)")
    p = rw.bounded_leaf_nbp(q, Ontology())
    names = sorted(p.variables)
    assert len(names) == 3
    for a in assignments(names):
        assert bp.eval_nbp(p, a) == all(a.values())


def test_depth_zero_thgp_is_the_conjunction():
    q = parse_query("q(x) :- R(x,y), S(y,z), A(z)")
    t = parse_ontology("A(x) -> B(x)\nR(x,y) -> S(x,y)")
    p = rw.btw_thgp(q, t, 2).program
    assert bp.is_thgp(p)
    for a in assignments(p.variables):
        assert bp.eval_hgp(p, a) == all(a.values())


def test_no_existential_heads_depth1():
    t = parse_ontology("A(x) -> B(x)\nR(x,y) -> S(x,y)")
    q = parse_query("q(x) :- S(x,y), B(y)")
    got = rw.rewrite(q, t, "pe", "depth1").program
    assert executor.eval_pe(got, parse_data("R(a,b). A(b).")) == {("a",)}


def test_query_shapes(q0):
    assert rw.query_shape(q0).tree_shaped
    assert rw.treewidth_and_decomposition(q0)[0] == 1
    one = parse_query("q(x) :- R(x,y)")
    assert rw.treewidth_and_decomposition(one)[0] == 1
    assert rw.query_shape(one).linear
    tri = parse_query("q() :- R(x,y), R(y,z), R(z,x)")
    assert rw.treewidth_and_decomposition(tri)[0] == 2
    assert not rw.query_shape(tri).tree_shaped


def test_strategy_choice(t0, q0):
    assert rw.choose_strategy(q0, t0, "ndl") == "bounded-leaf"
    assert rw.choose_strategy(q0, t0, "pe") == "generic"
    flat = parse_ontology("A(x) -> exists P(x,_)")
    assert rw.choose_strategy(q0, flat, "pe") == "depth1"
    with pytest.raises(StrategyError):
        rw.rewrite(q0, t0, "ndl", "depth1")
    with pytest.raises(StrategyError):
        rw.rewrite(q0, t0, "pe", "btw")


def test_depth1_rejects_deeper_ontologies(t0, q0):
    with pytest.raises(StrategyError):
        rw.rewrite_pe_depth1(q0, t0)


def test_depth1_growth_on_paths():
    t = parse_ontology("A(x) -> exists P(x,_)\nexists P(_,x) -> B(x)\nR(x,y) -> P(x,y)")
    ratios = []
    for n in range(2, 13, 2):
        atoms = [Atom("P", (f"y{i}", f"y{i + 1}")) for i in range(n)]
        atoms += [Atom("B", (f"y{i}",)) for i in range(n + 1)]
        q = ConjunctiveQuery(("y0",), atoms)
        size = rw.rewrite(q, t, "pe", "depth1").size
        # paths have treewidth 1, so the size is at most quadratic in |q|
        ratios.append(size / len(atoms) ** 2)
    assert max(ratios) == ratios[0]
    assert ratios[-1] < ratios[0]


# function equalities


def _same(f, g, names):
    return all(f(a) == g(a) for a in assignments(names))


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_nbp_computes_the_witness_function(seed):
    inst = genlab.random_instance(genlab.parse_class("bounded-leaf(4)"), seed, small)
    p = rw.bounded_leaf_nbp(inst.query, inst.tbox)
    f = rw.f_tw(inst.query, inst.tbox)
    names = p.variables | bp.formula_vars(f)
    if len(names) > 14:
        return
    assert _same(lambda a: bp.eval_nbp(p, a), lambda a: bp.eval_formula(f, a), names)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_thgp_computes_the_spelled_out_function(seed):
    inst = genlab.random_instance(genlab.parse_class("btw"), seed, small)
    prog = rw.btw_thgp(inst.query, inst.tbox, 2)
    p = prog.program
    assert bp.thgp_problems(p) == []
    assert len(p.vertices) <= prog.vertex_bound
    assert len(p.hyperedges) <= prog.hyperedge_bound
    f = rw.f_tw_prime(inst.query, inst.tbox)
    names = p.variables | bp.formula_vars(f)
    if len(names) > 14:
        return
    assert _same(lambda a: bp.eval_hgp(p, a, 10**6), lambda a: bp.eval_formula(f, a), names)


@settings(max_examples=25, deadline=None)
@given(seeds, st.sampled_from(["pe", "ndl"]))
def test_rewriting_round_trip_through_boolean_functions(seed, mode):
    inst = genlab.random_instance(genlab.parse_class("trees"), seed, genlab.Sizes(query_vars=(2, 4), axioms=(2, 5)))
    q, t = inst.query, inst.tbox
    r = rw.rewrite(q, t, mode, "generic")
    fn = rw.rewriting_to_boolfn(r.program)
    preds = rw.prim_predicates(q, t)
    if len(preds) > 9:
        return
    unary = t.concept_names | q.concept_names
    for gamma in assignments(preds):
        data = DataInstance(Atom(p, ("a",) if p in unary else ("a", "a")) for p, bit in gamma.items() if bit)
        if not reasoner.is_consistent(t, data):
            # rewritings are only meant for consistent data
            continue
        val = bp.eval_formula(fn, gamma) if mode == "pe" else bp.eval_circuit(fn, gamma)
        assert val == rw.f_prim(q, t, gamma)


# the master differential property, at unit-test scale


RUNS = [
    ("trees", "pe", "generic"),
    ("trees", "ndl", "generic"),
    ("trees", "ndl", "bounded-leaf"),
    ("bounded-leaf(4)", "ndl", "bounded-leaf"),
    ("btw", "ndl", "btw"),
    ("depth1", "pe", "depth1"),
    ("arbitrary", "ndl", "auto"),
    ("arbitrary", "pe", "auto"),
]


@pytest.mark.parametrize("cls,mode,strategy", RUNS)
@settings(max_examples=25, deadline=None)
@given(seed=seeds)
def test_rewritings_agree_with_brute_force(cls, mode, strategy, seed):
    inst = genlab.random_instance(genlab.parse_class(cls), seed, small)
    r = rw.rewrite(inst.query, inst.tbox, mode, strategy)
    if mode == "ndl":
        assert r.program.problems() == []
    run = executor.eval_pe if mode == "pe" else executor.eval_ndl
    if not reasoner.is_consistent(inst.tbox, inst.abox):
        return
    want = canonical.certain_answers_brute(inst.tbox, inst.abox, inst.query)
    assert run(r.program, inst.abox) == want


def test_pe_text_round_trip(t0, q0):
    r = rw.rewrite(q0, t0, "pe", "generic").program
    assert rw.parse_pe(str(r)) == r


def test_ndl_text_round_trip(t0, q0):
    r = rw.rewrite(q0, t0, "ndl", "bounded-leaf").program
    back = rw.parse_ndl(str(r))
    assert str(back) == str(r)
