import pytest

ACCEPTANCE = []


@pytest.fixture
def record():
    """Log one acceptance verdict; the line is echoed in the terminal summary."""

    def _record(name, passed, detail=""):
        ACCEPTANCE.append((name, bool(passed), detail))
        return passed

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}  {detail}")
