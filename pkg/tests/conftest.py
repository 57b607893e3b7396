"""Shared pytest hooks. The acceptance tests register one verdict line per
criterion here so every run finishes with a visible checklist, even under
output capture."""

from __future__ import annotations

verdict_lines: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if verdict_lines:
        terminalreporter.section("acceptance criteria")
        for line in verdict_lines:
            terminalreporter.line(line)
