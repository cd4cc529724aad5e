import pytest

CRITERIA: dict = {}


@pytest.fixture
def criterion():
    """Record a pass/fail line for an acceptance criterion."""

    def record(number, ok: bool, detail: str):
        CRITERIA[number] = (bool(ok), detail)
        print(f"criterion {number}: {'PASS' if ok else 'FAIL'} {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA, key=lambda k: (int(str(k).split()[0]), str(k))):
        ok, detail = CRITERIA[n]
        terminalreporter.write_line(f"criterion {str(n):<16} {'PASS' if ok else 'FAIL'}  {detail}")
