import pytest

from gkdv.eigen import solve_profile
from gkdv.model import KDV_K22, MKDV_K33, k_mn


@pytest.fixture(scope="session")
def k22_profile():
    return solve_profile(k_mn(2, 2), 1.0, 0.1, 8.0)


@pytest.fixture(scope="session")
def kdvk22_profiles():
    return {A: solve_profile(KDV_K22, A, 0.1, 20.0) for A in (1.0, 1.5, 2.0)}


@pytest.fixture(scope="session")
def mkdv_profiles_coarse():
    return {A: solve_profile(MKDV_K33, A, 0.05, 20.0) for A in (1.0, 2.0)}


ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
