from __future__ import annotations

import copy
import sys
from pathlib import Path

import pytest

from cms import catalog, parse_spec, validate

# make the independent oracles importable from the tests
sys.path.insert(0, str(Path(__file__).parent))


def build(doc: dict):
    return validate(parse_spec(copy.deepcopy(doc)))


@pytest.fixture(scope="session")
def prdm():
    return build(catalog.prdm())


@pytest.fixture(scope="session")
def dmse():
    return build(catalog.dmse())


@pytest.fixture(scope="session")
def gnce():
    return build(catalog.gnce())


@pytest.fixture(scope="session")
def mcae():
    return build(catalog.mcae(1, ["1/3", "2/3"]))


@pytest.fixture(scope="session")
def gmc():
    return build(catalog.gmc())
