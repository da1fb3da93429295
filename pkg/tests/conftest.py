"""Shared test plumbing: per-criterion result lines echoed in the run summary."""

import pytest

_criterion_lines = []


@pytest.fixture(scope="session")
def criterion():
    """Record and print one pass/fail line per acceptance criterion."""

    def _report(num: int, name: str, ok: bool, detail: str) -> bool:
        line = f"criterion {num:02d} {name}: {'PASS' if ok else 'FAIL'} ({detail})"
        _criterion_lines.append(line)
        print(line)
        return ok

    return _report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _criterion_lines:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in _criterion_lines:
            terminalreporter.write_line(line)
