import sys

import pytest
from hypothesis import settings

from stiffspec.coeffs import demo_problem, symmetric_problem, variable_problem
from stiffspec.verify import default_eps_grid

settings.register_profile("stiffspec", deadline=None, max_examples=25, derandomize=True)
settings.load_profile("stiffspec")


@pytest.fixture(scope="session")
def demo():
    return demo_problem()


@pytest.fixture(scope="session")
def symmetric():
    return symmetric_problem()


@pytest.fixture(scope="session")
def variable():
    return variable_problem()


@pytest.fixture(scope="session")
def grid():
    return default_eps_grid()


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for i in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.line(i))
