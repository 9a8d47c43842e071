import pytest

_CRITERIA: list[tuple[str, bool, str]] = []


@pytest.fixture
def criterion():
    """Record one acceptance line: criterion(name, passed, detail)."""

    def record(name: str, passed: bool, detail: str = "") -> bool:
        _CRITERIA.append((name, bool(passed), detail))
        print(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in _CRITERIA:
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")
