import pytest

from panta.bootstrap import load_seed


@pytest.fixture(scope="session")
def seed_image():
    """One seeded image for the whole run; tests must not advance it.
    Parsing against it only burns ids, which no test observes."""
    return load_seed()


@pytest.fixture()
def v(seed_image):
    return seed_image.snapshot()


@pytest.fixture()
def fresh_image():
    """A private seeded image for tests that commit."""
    return load_seed()
