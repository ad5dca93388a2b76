import pytest

_RESULTS = {}


@pytest.fixture
def report():
    """Record ``(passed, detail)`` for an acceptance criterion."""

    def _report(number, title, passed, detail):
        _RESULTS[number] = (title, bool(passed), detail)
        return passed

    return _report


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_RESULTS):
        title, ok, detail = _RESULTS[n]
        terminalreporter.write_line(f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}")
