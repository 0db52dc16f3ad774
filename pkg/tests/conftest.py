"""Collects the acceptance verdict lines and repeats them at the end of the run."""
import pytest

ACCEPTANCE = {}


@pytest.fixture
def verdict():
    """Record ``(criterion, passed, detail)`` and print the line immediately."""
    def record(number, title, passed, detail=""):
        line = f"ACCEPTANCE {number:>2} {'PASS' if passed else 'FAIL'}  {title}"
        if detail:
            line += f"  [{detail}]"
        ACCEPTANCE[number] = line
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[number])
