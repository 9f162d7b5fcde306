import numpy as np
import pytest

from absspec.problems import builtin

# filled by tests/test_acceptance.py: criterion number -> (passed, detail)
ACCEPTANCE: dict = {}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def adv0():
    return builtin("adv-diff", c=0)


@pytest.fixture(scope="session")
def adv2():
    return builtin("adv-diff", c=2)


@pytest.fixture(scope="session")
def periodic1():
    return builtin("periodic-adv-diff", c=1)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
