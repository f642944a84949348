import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from redactcert.oracle import FixtureSpec, generate_fixture
from redactcert.search import build_case


@pytest.fixture(scope="session")
def pf1():
    """Planted-disjoint fixture: two labels with separated contiguous supports."""
    return generate_fixture(FixtureSpec("planted-disjoint", k=9, margin=1.0, seed=0))


@pytest.fixture(scope="session")
def pf2():
    """Planted-overlap fixture: two labels leaning on one shared support."""
    return generate_fixture(FixtureSpec("planted-overlap", k=9, margin=1.0, seed=0))


@pytest.fixture(scope="session")
def noise_fixture():
    return generate_fixture(FixtureSpec("noise", k=9, seed=0))


def case_of(fixture, delta=0.2, **kw):
    return build_case(
        fixture.model, fixture.input, fixture.seg, fixture.l1, fixture.l2, delta, **kw
    )


@pytest.fixture(scope="session")
def pf1_case(pf1):
    return case_of(pf1)


@pytest.fixture(scope="session")
def pf2_case(pf2):
    return case_of(pf2)
