import pytest
from hypothesis import settings

from oscdecay.core import example5

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")

# filled by test_acceptance, printed at the end of the session
ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def surface():
    return example5()


@pytest.fixture(scope="session")
def phi(surface):
    return surface.phi


@pytest.fixture(scope="session")
def w(surface):
    return surface.weights


@pytest.fixture(scope="session")
def region(surface):
    return surface.region


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line[1])
