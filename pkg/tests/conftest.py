import pytest

_LINES = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per acceptance criterion (plus optional info lines)."""
    def record(cid, ok, text, info=()):
        line = f"{cid:>4} {'PASS' if ok else 'FAIL'}  {text}"
        _LINES.append(line)
        _LINES.extend(f"          {s}" for s in info)
        print(line)
        for s in info:
            print("    ", s)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
