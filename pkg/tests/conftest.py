import numpy as np
import pytest

from maxent_tomo import (build_observable_set, build_state, iodine_constants, natural_constants,
                         paper_grid, paper_recipe)

PAPER_TIMES = [2.0, 3.0, 4.0, 5.0]

_acceptance_lines = []


@pytest.fixture
def record_criterion():
    """Record one acceptance line; printed in the terminal summary."""
    def record(number, passed, detail):
        _acceptance_lines.append(f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}")
    return record


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def iodine():
    return iodine_constants()


@pytest.fixture(scope="session")
def natural():
    return natural_constants()


@pytest.fixture(scope="session")
def grid51(iodine):
    return paper_grid(iodine)


@pytest.fixture(scope="session")
def obs51(grid51, iodine):
    return build_observable_set(grid51, iodine, PAPER_TIMES)


@pytest.fixture(scope="session")
def paper_truth(grid51, iodine):
    return build_state(paper_recipe(), grid51, iodine)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
