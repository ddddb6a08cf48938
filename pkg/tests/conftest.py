import pytest

_ACCEPTANCE_LINES = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL summary line, then assert on it."""

    def check(label, passed, detail=""):
        line = f"[{'PASS' if passed else 'FAIL'}] {label}" + (f": {detail}" if detail else "")
        _ACCEPTANCE_LINES.append(line)
        print(line)
        assert passed, line

    return check


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
