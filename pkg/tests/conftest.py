from importlib import resources

import pytest

from tenurematch.scenario import parse_document
from tenurematch.sweeps import grid_problems


def _bundled(name):
    text = (resources.files("tenurematch") / "scenarios" / name).read_text()
    return parse_document(text)


@pytest.fixture(scope="session")
def example1_doc():
    return _bundled("example1.scenario")


@pytest.fixture(scope="session")
def section5_doc():
    return _bundled("section5.scenario")


@pytest.fixture(scope="session")
def grid():
    """The exhaustive single-period instance family, materialized once."""
    return list(grid_problems())
