from pathlib import Path

import pytest

from daekit import load_system

SYSTEMS = Path(__file__).resolve().parents[1] / "systems"


def system_path(name):
    return str(SYSTEMS / f"{name}.sys")


@pytest.fixture(scope="session")
def pozzo():
    return load_system(system_path("pozzo"))


@pytest.fixture(scope="session")
def equivlien():
    return load_system(system_path("equivlien"))


@pytest.fixture(scope="session")
def exmults():
    return load_system(system_path("exmults"))


@pytest.fixture(scope="session")
def eqex1():
    return load_system(system_path("eqex1"))


@pytest.fixture(scope="session")
def eqex2():
    return load_system(system_path("eqex2"))
