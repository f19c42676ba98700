import time
from contextlib import contextmanager

import pytest

_RESULTS: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Time a block, enforce its runtime budget and record a PASS/FAIL line."""

    @contextmanager
    def check(number: int, name: str, budget: float | None = None):
        start = time.perf_counter()
        status = "FAIL"
        try:
            yield
            elapsed = time.perf_counter() - start
            if budget is not None:
                assert elapsed < budget, f"took {elapsed:.2f}s, budget {budget}s"
            status = "PASS"
        finally:
            elapsed = time.perf_counter() - start
            limit = f" (budget {budget:g}s)" if budget is not None else ""
            line = f"criterion {number:2d} {status}: {name} [{elapsed:.2f}s{limit}]"
            _RESULTS[number] = line
            print(line)

    return check


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        terminalreporter.write_line(_RESULTS[number])
