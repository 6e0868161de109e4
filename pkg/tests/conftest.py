"""Shared pytest wiring for the release-gate checklist.

test_acceptance.py records one line per gate through record_criterion; the
lines are replayed after the run summary so a full `pytest` ends with a
readable pass/fail checklist including the measured numbers.
"""

_criterion_lines: list[str] = []


def record_criterion(name: str, ok: bool, detail: str) -> None:
    _criterion_lines.append(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if _criterion_lines:
        terminalreporter.section("release gates")
        for line in _criterion_lines:
            terminalreporter.write_line(line)
