"""Command-line interface: ``owlql <command> ...``.

Exit codes: 0 success, 1 domain error (inconsistent knowledge base where a
consistent one is needed, class or normal-form precondition violated, strategy
not applicable), 2 usage or parse error.
"""

from __future__ import annotations

import csv
import json
import sys
import time
from pathlib import Path

import click

from . import boolprog as bp
from . import canonical, executor, genlab, reasoner, rewriter, witnesses
from .syntax import (
    DataInstance,
    Ontology,
    ParseError,
    natural_key,
    parse_data,
    parse_ontology,
    parse_query,
    print_data,
    print_ontology,
    print_query,
)


class DomainError(click.ClickException):
    exit_code = 1


class InputError(click.ClickException):
    exit_code = 2


def _read(path: str, parse, what: str):
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise InputError(f"cannot read {what} {path}: {e.strerror}")
    try:
        return parse(text)
    except ParseError as e:
        raise InputError(f"{what} {path}: {e}")
    except ValueError as e:
        raise InputError(f"{what} {path}: {e}")


def _tbox(path):
    return Ontology(()) if path is None else _read(path, parse_ontology, "ontology")


def _abox(path):
    return _read(path, parse_data, "data instance")


def _query(path):
    return _read(path, parse_query, "query")


def _program(path, what):
    return _read(path, bp.loads, what)


def _emit(text: str, out: str | None):
    if not text.endswith("\n"):
        text += "\n"
    if out is None:
        click.echo(text, nl=False)
    else:
        Path(out).write_text(text)


def _write_dir(out: str, files: dict):
    d = Path(out)
    d.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (d / name).write_text(text)
        click.echo(str(d / name))


def _load_config(ctx, param, value):
    if value is None:
        return None
    try:
        ctx.default_map = json.loads(Path(value).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise click.BadParameter(f"cannot load config: {e}", ctx, param)
    return value


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.option(
    "--config",
    type=click.Path(dir_okay=False),
    callback=_load_config,
    is_eager=True,
    expose_value=False,
    help='JSON file of per-command defaults, e.g. {"answer": {"engine": "bl"}}; flags win.',
)
def cli():
    """Query answering and rewriting over DL-Lite ontologies."""


@cli.command()
@click.option("--tbox", required=True, type=click.Path(), help="Ontology file (.dl).")
@click.option("--abox", type=click.Path(), help="Data instance (.abox); adds a consistency verdict.")
def check(tbox, abox):
    """Print the ontology depth (a number or omega) and, with data, consistency."""
    t = _tbox(tbox)
    click.echo(f"depth: {reasoner.format_depth(reasoner.ontology_depth(t))}")
    if abox is not None:
        click.echo("consistent" if reasoner.is_consistent(t, _abox(abox)) else "inconsistent")


@cli.command()
@click.option("--query", required=True, type=click.Path(), help="Conjunctive query (.cq).")
@click.option("--tbox", type=click.Path(), help="Ontology; adds its depth and the strategy choices.")
def analyze(query, tbox):
    """Print the query shape: tree-shapedness, leaves, treewidth, connectivity."""
    q = _query(query)
    shape = rewriter.query_shape(q)
    click.echo(f"treeShaped: {str(shape.tree_shaped).lower()}")
    click.echo(f"leafCount: {shape.leaf_count}")
    click.echo(f"linear: {str(shape.linear).lower()}")
    click.echo(f"connected: {str(shape.connected).lower()}")
    try:
        width, _ = rewriter.treewidth_and_decomposition(q)
        click.echo(f"treewidth: {width}")
    except rewriter.StrategyError as e:
        click.echo(f"treewidth: unknown ({e})")
    if tbox is not None:
        t = _tbox(tbox)
        click.echo(f"depth: {reasoner.format_depth(reasoner.ontology_depth(t))}")
        click.echo(f"strategy ndl: {rewriter.choose_strategy(q, t, 'ndl')}")
        click.echo(f"strategy pe: {rewriter.choose_strategy(q, t, 'pe')}")


@cli.command(name="witnesses")
@click.option("--tbox", required=True, type=click.Path())
@click.option("--query", required=True, type=click.Path())
def witnesses_cmd(tbox, query):
    """Print every tree witness of the query over the ontology."""
    for t in witnesses.enumerate_tree_witnesses(_query(query), _tbox(tbox)):
        click.echo(str(t))


@cli.command()
@click.option("--tbox", required=True, type=click.Path())
@click.option("--abox", required=True, type=click.Path())
@click.option("--depth", type=click.IntRange(min=0), default=None,
              help="Word-length bound (default: the ontology depth, or 2|T| when it is omega).")
@click.option("-o", "--output", type=click.Path(), help="Write the model here instead of stdout.")
def chase(tbox, abox, depth, output):
    """Emit the canonical model truncated at --depth as elem/in/edge lines."""
    t, a = _tbox(tbox), _abox(abox)
    if depth is None:
        d = reasoner.ontology_depth(t)
        depth = 2 * t.size if d == reasoner.OMEGA else d
    try:
        model = canonical.build_canonical(t, a, depth)
    except canonical.InconsistentKB:
        raise DomainError("the knowledge base is inconsistent, so it has no canonical model")
    _emit("\n".join(model.lines()), output)


@cli.command()
@click.option("--tbox", required=True, type=click.Path())
@click.option("--query", required=True, type=click.Path())
@click.option("--mode", type=click.Choice(["pe", "ndl"]), default="ndl", show_default=True)
@click.option("--strategy", type=click.Choice(rewriter.STRATEGIES), default="auto", show_default=True)
@click.option("--leaf-limit", type=click.IntRange(min=1), default=rewriter.DEFAULT_LEAF_LIMIT, show_default=True,
              help="auto picks bounded-leaf for tree-shaped queries with at most this many leaves.")
@click.option("--width-limit", type=click.IntRange(min=1), default=rewriter.DEFAULT_WIDTH_LIMIT, show_default=True,
              help="auto picks btw/depth1 for queries of at most this treewidth.")
@click.option("-o", "--output", type=click.Path())
def rewrite(tbox, query, mode, strategy, leaf_limit, width_limit, output):
    """Compile a PE- or NDL-rewriting of the query under the ontology."""
    t, q = _tbox(tbox), _query(query)
    try:
        r = rewriter.rewrite(q, t, mode, strategy, leaf_limit, width_limit)
    except rewriter.StrategyError as e:
        raise DomainError(str(e))
    _emit(str(r.program), output)


def _format_tuple(t: tuple) -> str:
    return " ".join(t) if t else "()"


@cli.command()
@click.option("--tbox", required=True, type=click.Path())
@click.option("--abox", required=True, type=click.Path())
@click.option("--query", required=True, type=click.Path())
@click.option("--engine", type=click.Choice(executor.ENGINES), default="brute", show_default=True)
@click.option("--strategy", type=click.Choice(rewriter.STRATEGIES), default="auto", show_default=True,
              help="Rewriting strategy for the pe and ndl engines.")
@click.option("--debug", is_flag=True, help="Check the loop invariants of the bl engine.")
def answer(tbox, abox, query, engine, strategy, debug):
    """Print the certain answers, one tuple per line, sorted.

    A Boolean query prints () when it is entailed and nothing otherwise.
    """
    t, a, q = _tbox(tbox), _abox(abox), _query(query)
    try:
        ans = executor.answer(t, a, q, engine, strategy, debug=debug)
    except rewriter.StrategyError as e:
        raise DomainError(str(e))
    for tup in sorted(ans, key=lambda x: [natural_key(v) for v in x]):
        click.echo(_format_tuple(tup))


@cli.group()
def gen():
    """Generate instances: reductions from programs and random instances."""


@gen.command(name="thgp-query")
@click.option("--hgp", required=True, type=click.Path(), help="Tree hypergraph program (JSON).")
@click.option("-o", "--output", required=True, type=click.Path(file_okay=False))
def gen_thgp(hgp, output):
    """Boolean query and ontology whose primitive function is the program's function."""
    p = _program(hgp, "hypergraph program")
    if not isinstance(p, bp.HypergraphProgram):
        raise InputError(f"{hgp} does not hold a hypergraph program")
    try:
        red = genlab.thgp_to_query_ontology(p)
    except bp.ProgramError as e:
        raise DomainError(str(e))
    _write_dir(output, {"query.cq": print_query(red.query), "tbox.dl": print_ontology(red.tbox)})


@gen.command(name="circuit-query")
@click.option("--circuit", required=True, type=click.Path(), help="Circuit (JSON).")
@click.option("--input", "bits", required=True, help="Input bits for the variables in natural order, e.g. 10010.")
@click.option("--normalize", is_flag=True, help="Bring the circuit into normal form first.")
@click.option("-o", "--output", required=True, type=click.Path(file_okay=False))
def gen_circuit(circuit, bits, normalize, output):
    """Linear query and knowledge base entailing a(a) iff the circuit accepts the input."""
    c = _program(circuit, "circuit")
    if not isinstance(c, bp.MonotoneCircuit):
        raise InputError(f"{circuit} does not hold a circuit")
    if set(bits) - {"0", "1"}:
        raise InputError("--input must be a string of 0s and 1s")
    if normalize:
        c = genlab.normalize_circuit(c)
    try:
        red = genlab.circuit_to_linear_query(c, bits)
    except bp.ProgramError as e:
        raise DomainError(str(e))
    except ValueError as e:
        raise InputError(str(e))
    _write_dir(output, {
        "query.cq": print_query(red.query),
        "tbox.dl": print_ontology(red.tbox),
        "data.abox": print_data(red.abox),
    })


def _class(text: str) -> genlab.InstanceClass:
    try:
        return genlab.parse_class(text)
    except genlab.ClassError as e:
        raise InputError(str(e))


@gen.command(name="random")
@click.option("--class", "cls", required=True,
              help="trees, bounded-leaf(l), linear, btw(t), depth(d), depth1 or arbitrary.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("-o", "--output", required=True, type=click.Path(file_okay=False))
def gen_random(cls, seed, output):
    """Random ontology, data instance and query inside the class."""
    inst = genlab.random_instance(_class(cls), seed)
    _write_dir(output, inst.files())


@cli.command()
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--cases", type=click.IntRange(min=0), default=100, show_default=True)
@click.option("--class", "classes", multiple=True, type=click.Choice(genlab.SELFTEST_CLASSES),
              help="Instance class (repeatable; default all).")
@click.option("--workers", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--debug", is_flag=True, help="Also check the bl engine's loop invariants.")
def selftest(seed, cases, classes, workers, debug):
    """Run every applicable engine on random instances and compare with the brute oracle."""
    failed = False
    for cls in classes or genlab.SELFTEST_CLASSES:
        agree = 0
        first = None
        for res in genlab.selftest(seed, cases, cls, debug=debug, workers=workers):
            if res.ok:
                agree += 1
            elif first is None:
                first = res
        if first is not None:
            failed = True
            click.echo(genlab.describe_divergence(first))
        click.echo(f"selftest {cls}: {agree}/{cases} agreements")
    if failed:
        sys.exit(1)


def _sizes(text: str) -> list:
    """``4..40``, ``4..40:2`` or ``4,8,16``."""
    try:
        if ".." in text:
            span, _, step = text.partition(":")
            lo, hi = span.split("..")
            return list(range(int(lo), int(hi) + 1, int(step) if step else 1))
        return [int(x) for x in text.split(",")]
    except ValueError:
        raise InputError(f"cannot parse --sizes {text!r}; use 4..40, 4..40:2 or 4,8,16")


BENCH_COLUMNS = ("strategy", "query_size", "tbox_size", "rewriting_size", "compile_ms", "eval_ms")


def bench_rows(cls: genlab.InstanceClass, sizes: list, strategies: list, seed: int = 0,
               evaluate: bool = True, timing: bool = True):
    """One row per (size, strategy); the bounded-leaf class uses the spider family."""
    for n in sizes:
        if cls.topology == "leaves":
            tbox, q = genlab.bounded_leaf_family(n, cls.param)
            abox = DataInstance(genlab.bench_facts())
        else:
            fixed = genlab.Sizes(query_vars=(n, n))
            inst = genlab.random_instance(cls, genlab.case_seed(seed, f"bench-{cls}", n), fixed)
            tbox, q, abox = inst.tbox, inst.query, inst.abox
        for strategy in strategies:
            t0 = time.perf_counter()
            try:
                r = rewriter.rewrite(q, tbox, "ndl", strategy)
            except rewriter.StrategyError:
                continue
            t1 = time.perf_counter()
            if evaluate:
                executor.eval_ndl(r.program, abox)
            t2 = time.perf_counter()
            ms = (lambda a, b: f"{(b - a) * 1000:.1f}") if timing else (lambda a, b: "")
            yield (r.strategy, q.size, tbox.size, r.size, ms(t0, t1), ms(t1, t2) if evaluate else "")


@cli.command()
@click.option("--class", "cls", default="bounded-leaf(3)", show_default=True)
@click.option("--sizes", default="4..40:2", show_default=True, help="Query sizes: 4..40, 4..40:2 or 4,8,16.")
@click.option("--strategy", "strategies", default="auto", show_default=True,
              help="Comma-separated NDL strategies.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--eval/--no-eval", "evaluate", default=True, show_default=True,
              help="Also evaluate each rewriting on a small data instance.")
@click.option("--timing/--no-timing", default=True, show_default=True,
              help="Leave the millisecond columns empty, making the output reproducible.")
def bench(cls, sizes, strategies, seed, evaluate, timing):
    """Emit CSV growth curves of NDL rewriting size and time against query size."""
    c = _class(cls)
    strats = [s.strip() for s in strategies.split(",") if s.strip()]
    bad = [s for s in strats if s not in rewriter.STRATEGIES]
    if bad:
        raise InputError(f"unknown strategy {bad[0]!r}")
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(BENCH_COLUMNS)
    for row in bench_rows(c, _sizes(sizes), strats, seed, evaluate, timing):
        w.writerow(row)
        sys.stdout.flush()


def main(argv=None) -> int:
    """Run the CLI and return its exit code."""
    try:
        rv = cli.main(args=argv, prog_name="owlql", standalone_mode=False)
    except click.exceptions.Exit as e:
        return e.exit_code
    except click.ClickException as e:
        e.show()
        return e.exit_code
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 1
    return rv if isinstance(rv, int) else 0


def run():
    sys.exit(main())


if __name__ == "__main__":
    run()
