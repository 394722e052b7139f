import pytest

_ACCEPTANCE_LINES: list = []


@pytest.fixture
def criterion_report():
    """Record and print one PASS/FAIL line per acceptance criterion."""
    def report(number: int, title: str, ok: bool, detail: str) -> bool:
        line = f"CRITERION {number:>2} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"
        _ACCEPTANCE_LINES.append((number, line))
        print(line)
        return ok
    return report


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
