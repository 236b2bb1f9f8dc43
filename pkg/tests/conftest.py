"""Shared test helpers.

The acceptance tests append one line per criterion to ACCEPTANCE_LINES;
the terminal-summary hook prints them after the run so the checklist is
visible even when pytest captures per-test output.
"""

ACCEPTANCE_LINES = []


def record(line):
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance summary")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
