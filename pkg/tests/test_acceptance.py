"""Acceptance suite: one PASS/FAIL line per criterion, printed to the terminal."""

import time

import numpy as np
import pytest

from owlql import boolprog as bp
from owlql import canonical, executor, genlab, reasoner
from owlql import rewriter as rw
from owlql.cli import bench_rows
from owlql.executor import InvariantViolation
from owlql.syntax import Role
from owlql.witnesses import enumerate_tree_witnesses

from .oracles import assignments

# calibrated once over seeds 0..99, 1000..1299 and 3000..3499 of five classes
# (largest ratios seen: 0.30 and 2.79), then frozen
PE_FACTOR = 1
NDL_FACTOR = 4

SELFTEST_SEED = 20240
CASES_PER_CLASS = 500


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'} ({detail})")
        assert ok, detail

    return emit


def test_criterion_1_golden_answers(t0, a0, q0, report):
    rw.context.cache_clear()
    reasoner.index.cache_clear()
    start = time.perf_counter()
    got = {e: executor.answer(t0, a0, q0, e) for e in executor.ENGINES}
    elapsed = time.perf_counter() - start
    ok = all(v == {("c", "a")} for v in got.values()) and elapsed < 1
    report(1, ok, f"{len(got)} engines, answers {sorted(set(map(frozenset, got.values())), key=str)}, {elapsed:.3f}s")


def test_criterion_2_golden_witnesses(t0, q0, report):
    ts = enumerate_tree_witnesses(q0, t0)
    got = {(t.roots, t.interior, t.generators) for t in ts}
    want = {
        (frozenset({"y2", "x2"}), frozenset({"y1", "y3", "y4", "y5"}), frozenset({Role("P")})),
        (frozenset({"y1", "y4"}), frozenset({"y3", "y5"}), frozenset({Role("S")})),
        (frozenset({"y3"}), frozenset({"y5"}), frozenset({Role("T", True)})),
    }
    report(2, got == want and len(ts) == 3, f"{len(ts)} witnesses, exact match {got == want}")


def test_criterion_3_thgp_reduction(report):
    start = time.perf_counter()
    mismatches = checked = 0
    for seed in range(40):
        p = genlab.random_thgp(seed, n_tree_vertices=6, n_hyperedges=3, n_vars=6)
        assert len(p.variables) <= 6
        red = genlab.thgp_to_query_ontology(p)
        for a in assignments(p.variables):
            checked += 1
            mismatches += bp.eval_hgp(p, a) != rw.f_prim(red.query, red.tbox, red.gamma(a))
    elapsed = time.perf_counter() - start
    report(3, mismatches == 0 and elapsed < 300, f"40 programs, {checked} assignments, {mismatches} mismatches, {elapsed:.1f}s")


def _agree(f, g, names):
    return sum(f(a) != g(a) for a in assignments(names))


def test_criterion_4_conversions(report):
    bad = 0
    for seed in range(40):
        nbp = genlab.random_nbp(seed, n_vertices=5, n_edges=8, n_vars=5)
        h = bp.nbp_to_interval_hgp(nbp)
        bad += _agree(lambda a: bp.eval_nbp(nbp, a), lambda a: bp.eval_hgp(h, a, 10**6), nbp.variables)

        c = genlab.random_circuit(seed, n_vars=5, n_gates=10, semi_unbounded=True)
        th = bp.circuit_to_thgp(c)
        bad += _agree(lambda a: bp.eval_circuit(c, a), lambda a: bp.eval_hgp(th, a, 10**6), c.variables)

        tp = genlab.random_thgp(seed, n_tree_vertices=8, n_hyperedges=4, n_vars=5)
        tc = bp.thgp_to_circuit(tp)
        bad += _agree(lambda a: bp.eval_hgp(tp, a), lambda a: bp.eval_circuit(tc, a), tp.variables)

        mono = genlab.random_nbp(seed, n_vertices=7, n_edges=12, n_vars=5, negations=False)
        mc = bp.nbp_to_circuit(mono)
        bad += _agree(lambda a: bp.eval_nbp(mono, a), lambda a: bp.eval_circuit(mc, a), mono.variables)
    counts = "nbp->interval, circuit->thgp, thgp->circuit, nbp->circuit: 40 each"
    report(4, bad == 0, f"{counts}, {bad} mismatches")


class _Harness:
    """Criterion 5 runs once; criterion 9 reads its bounded-leaf half."""

    def __init__(self):
        self.results = {}
        self.violations = []
        self.elapsed = 0.0

    def run(self):
        start = time.perf_counter()
        for cls in genlab.SELFTEST_CLASSES:
            debug = cls == "bounded-leaf"
            ok = 0
            divergences = []
            for i in range(CASES_PER_CLASS):
                inst = genlab.random_instance(genlab.parse_class(cls), genlab.case_seed(SELFTEST_SEED, cls, i))
                try:
                    res = genlab.check_instance(inst, debug=debug)
                except InvariantViolation as e:
                    self.violations.append((inst.seed, str(e)))
                    continue
                if res.ok:
                    ok += 1
                else:
                    divergences.append(genlab.describe_divergence(res))
            self.results[cls] = (ok, divergences)
        self.elapsed = time.perf_counter() - start
        return self


@pytest.fixture(scope="module")
def harness():
    return _Harness().run()


def test_criterion_5_engine_agreement(harness, report):
    summary = ", ".join(f"{cls} {ok}/{CASES_PER_CLASS}" for cls, (ok, _) in harness.results.items())
    ok = all(n == CASES_PER_CLASS for n, _ in harness.results.values()) and harness.elapsed < 900
    first = next((d[0] for _, d in harness.results.values() if d), "")
    report(5, ok, f"{summary}, {harness.elapsed:.0f}s" + (f"\n{first}" if first else ""))


INPUTS = frozenset(f"x{i}" for i in range(1, 6))


def test_criterion_6_linear_reduction(report):
    mismatches = checked = 0
    circuits = [genlab.sample_circuit()]
    circuits += [genlab.random_normal_circuit(seed, and_levels=1 + seed % 3, width=3, n_vars=5) for seed in range(30)]
    for c in circuits:
        assert genlab.normal_form_problems(c) == []
        for a in assignments(c.variables | INPUTS):
            red = genlab.circuit_to_linear_query(c, a)
            entailed = ("a",) in canonical.certain_answers_brute(red.tbox, red.abox, red.query)
            checked += 1
            mismatches += entailed != bp.eval_circuit(c, a)
    report(6, mismatches == 0, f"{len(circuits)} circuits, {checked} inputs, {mismatches} mismatches")


def test_criterion_7_size_bounds(report):
    thgp_bad = shape_bad = programs = 0
    worst = {"pe": 0.0, "ndl": 0.0}
    for cls in ("trees", "bounded-leaf", "btw", "depth1", "arbitrary"):
        for seed in range(200):
            inst = genlab.random_instance(genlab.parse_class(cls), seed)
            q, t = inst.query, inst.tbox
            scale = q.size * max(1, t.size)
            pe = rw.rewrite(q, t, "pe", "generic")
            worst["pe"] = max(worst["pe"], pe.size / (pe.stats["formula_size"] * scale))
            shape_bad += pe.size > PE_FACTOR * pe.stats["formula_size"] * scale
            for strategy in ("generic", "bounded-leaf", "btw"):
                try:
                    r = rw.rewrite(q, t, "ndl", strategy)
                except rw.StrategyError:
                    continue
                programs += 1
                worst["ndl"] = max(worst["ndl"], r.size / (r.stats["circuit_size"] * scale))
                shape_bad += r.size > NDL_FACTOR * r.stats["circuit_size"] * scale
                if strategy == "btw":
                    s = r.stats
                    thgp_bad += s["thgp_vertices"] > s["vertex_bound"]
                    thgp_bad += s["thgp_hyperedges"] > s["hyperedge_bound"]
    ok = thgp_bad == 0 and shape_bad == 0
    report(7, ok, f"{programs} NDL programs, {thgp_bad} THGP bound violations, {shape_bad} size-shape violations, "
                  f"largest ratios pe {worst['pe']:.2f}/{PE_FACTOR} ndl {worst['ndl']:.2f}/{NDL_FACTOR}")


def test_criterion_8_growth_curve(report):
    rows = list(bench_rows(genlab.parse_class("bounded-leaf(3)"), list(range(4, 41, 2)), ["auto"],
                           evaluate=False, timing=False))
    x = np.array([r[1] for r in rows], dtype=float)
    y = np.array([r[3] for r in rows], dtype=float)
    coef = np.polyfit(x, y, 4)
    residual = y - np.polyval(coef, x)
    r2 = 1 - (residual @ residual) / ((y - y.mean()) @ (y - y.mean()))
    strategies = {r[0] for r in rows}
    report(8, r2 >= 0.98 and strategies == {"bounded-leaf"},
           f"{len(rows)} sizes |q|={int(x[0])}..{int(x[-1])}, degree-4 R^2={r2:.5f}, strategy {sorted(strategies)}")


def test_criterion_9_stack_invariants(harness, report):
    ok_cases = harness.results["bounded-leaf"][0]
    report(9, not harness.violations,
           f"{CASES_PER_CLASS} bounded-leaf cases in debug mode, {len(harness.violations)} invariant violations, "
           f"{ok_cases} agreeing")
