import warnings

import pytest

_VERDICTS: list[str] = []


@pytest.fixture
def verdict():
    """Record a PASS/FAIL line for the acceptance summary and assert on it."""

    def record(name: str, ok: bool, detail: str) -> None:
        line = f"{'PASS' if ok else 'FAIL'} {name}: {detail}"
        print(line)
        _VERDICTS.append(line)
        assert ok, line

    return record


@pytest.fixture(autouse=True)
def _quiet_credibility_warnings():
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="group corrections exceed", category=RuntimeWarning)
        yield


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
