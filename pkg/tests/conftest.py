"""Shared pytest plumbing.

The acceptance tests record a one-line verdict per criterion; they are
replayed in the terminal summary so they survive output capture.
"""

VERDICTS = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)
