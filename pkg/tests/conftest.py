import functools

import pytest

from soler3d.profiles import NonlinearityModel, solve_profile

# criterion number -> (passed, detail); filled by test_acceptance, echoed in the terminal summary
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@functools.lru_cache(maxsize=None)
def cached_profile(omega: float, mass: float = 1.0, power: int = 1):
    return solve_profile(NonlinearityModel(mass=mass, power=power), omega)


@pytest.fixture(scope="session")
def cubic():
    return NonlinearityModel()


@pytest.fixture(scope="session")
def profile09():
    return cached_profile(0.9)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
