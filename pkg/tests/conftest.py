from __future__ import annotations

from pathlib import Path

import pytest

from optforge.canonicalize import Language, SourceUnit

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def listing1() -> str:
    return (DATA / "listing1.cpp").read_text()


@pytest.fixture(scope="session")
def listing2() -> str:
    return (DATA / "listing2.cpp").read_text()


@pytest.fixture(scope="session")
def listing3() -> str:
    return (DATA / "listing3.diff").read_text()


@pytest.fixture(scope="session")
def prompt_golden() -> str:
    return (DATA / "system_prompt.txt").read_text()


@pytest.fixture
def listing1_unit(listing1) -> SourceUnit:
    return SourceUnit("fig2", Language.CPP, listing1)


@pytest.fixture
def listing2_unit(listing2) -> SourceUnit:
    return SourceUnit("fig2", Language.CPP, listing2)
