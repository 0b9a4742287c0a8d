import pytest

_LINES = []


@pytest.fixture
def report(request):
    """Record one PASS/FAIL line for the acceptance summary."""

    def emit(passed, text):
        line = f"{'PASS' if passed else 'FAIL'}  {request.node.name}: {text}"
        _LINES.append(line)
        print(line)
        return passed

    return emit


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
