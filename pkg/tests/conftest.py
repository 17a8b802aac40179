from pathlib import Path

import pytest

from owlql.syntax import parse_data, parse_ontology, parse_query

DATA = Path(__file__).resolve().parent.parent / "data"


@pytest.fixture(scope="session")
def data_dir():
    return DATA


@pytest.fixture(scope="session")
def t0():
    return parse_ontology((DATA / "t0.dl").read_text())


@pytest.fixture(scope="session")
def a0():
    return parse_data((DATA / "a0.abox").read_text())


@pytest.fixture(scope="session")
def q0():
    return parse_query((DATA / "q0.cq").read_text())
