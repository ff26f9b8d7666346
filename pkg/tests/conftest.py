import numpy as np
import pytest


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


@pytest.fixture
def rng():
    return np.random.default_rng(20241019)


_ACCEPTANCE = {}


@pytest.fixture
def record():
    """Store one acceptance verdict; printed in the terminal summary."""

    def _record(number, title, passed, detail=""):
        _ACCEPTANCE[number] = (title, bool(passed), detail)
        return passed

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in range(1, 11):
        if number in _ACCEPTANCE:
            title, passed, detail = _ACCEPTANCE[number]
            verdict = "PASS" if passed else "FAIL"
        else:
            title, verdict, detail = "not run", "FAIL", ""
        terminalreporter.write_line(f"{verdict} criterion {number:2d}: {title}  {detail}".rstrip())
