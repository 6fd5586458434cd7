"""Shared fixtures; collects acceptance verdicts for the terminal summary."""

import pytest

_VERDICTS: list[tuple[str, bool, str]] = []


@pytest.fixture
def record():
    """``record(name, passed, detail)`` registers one acceptance verdict."""

    def _record(name: str, passed: bool, detail: str = "") -> bool:
        _VERDICTS.append((name, bool(passed), detail))
        return bool(passed)

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _VERDICTS:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
