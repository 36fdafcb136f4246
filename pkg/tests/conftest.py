import pathlib

import pytest

from kinbounds import parse_network, reduce

NETWORKS = pathlib.Path(__file__).resolve().parent.parent / "networks"


def load_network(name: str):
    return parse_network((NETWORKS / f"{name}.kin").read_text())


@pytest.fixture(scope="session")
def toy():
    return reduce(load_network("toy"))


@pytest.fixture(scope="session")
def reversible():
    return reduce(load_network("reversible"))


@pytest.fixture(scope="session")
def cyclic():
    return reduce(load_network("cyclic"))


@pytest.fixture(scope="session")
def chain():
    return reduce(load_network("chain"))


@pytest.fixture(scope="session")
def reversible_mixed():
    return reduce(load_network("reversible_mixed"))
