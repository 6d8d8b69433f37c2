"""Shared pytest wiring.

The acceptance tests append one formatted line per criterion to
ACCEPTANCE_LINES; the terminal-summary hook prints them at the end of
the run so the verdicts are visible even when every test passes.
"""

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
