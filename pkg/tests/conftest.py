import numpy as np
import pytest

from srmatch.potential import equal_closed_table, iterated_table, unequal_closed_table


@pytest.fixture(scope="session")
def f_eq():
    return equal_closed_table(2000)


@pytest.fixture(scope="session")
def f_uneq():
    return unequal_closed_table(2000)


@pytest.fixture(scope="session")
def f_iter():
    # N=1000 keeps the suite fast; the acceptance file uses N=2000
    return iterated_table(3, 1000)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line for an acceptance criterion and return the flag for asserting."""
    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
