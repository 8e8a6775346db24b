import pytest

_LINES = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one ``ACCEPTANCE`` line; shown in the terminal summary."""
    lines = request.config.stash.setdefault(_LINES, [])

    def record(number: int, name: str, passed: bool, detail: str) -> bool:
        lines.append((number, f"ACCEPTANCE {number} {name}: {'PASS' if passed else 'FAIL'} {detail}"))
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for _, text in sorted(lines, key=lambda t: t[0]):
        terminalreporter.write_line(text)
