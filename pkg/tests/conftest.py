"""Collects one PASS/FAIL line per acceptance criterion and prints them at the end."""

import pytest

_LINES: dict[int, str] = {}


class Recorder:
    def __call__(self, criterion: int, ok: bool, detail: str) -> bool:
        line = f"acceptance {criterion}: {'PASS' if ok else 'FAIL'} - {detail}"
        _LINES[criterion] = line
        print(line, flush=True)
        return ok


@pytest.fixture(scope="session")
def record():
    return Recorder()


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_LINES):
            terminalreporter.write_line(_LINES[k])
