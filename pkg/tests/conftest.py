import pytest

_LINES = pytest.StashKey[list]()


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""
    lines = request.config.stash.setdefault(_LINES, [])

    def record(number: int, ok: bool, detail: str, elapsed: float, limit: float = None):
        if limit is not None:
            ok = ok and elapsed < limit
            timing = f"{elapsed:.2f}s < {limit:g}s"
        else:
            timing = f"{elapsed:.2f}s"
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}  [{timing}]"
        lines.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
