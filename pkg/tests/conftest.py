from __future__ import annotations

import pytest


def pytest_configure(config):
    config._acceptance_lines = {}


@pytest.fixture
def verdict(request):
    """Record a one-line PASS/FAIL verdict for a numbered criterion, then assert it."""
    lines = request.config._acceptance_lines

    def record(number: int, ok: bool, detail: str) -> None:
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines[number] = line
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", {})
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(lines):
        terminalreporter.write_line(lines[number])
