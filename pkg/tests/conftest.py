"""Shared test plumbing: the acceptance checklist summary."""

# (number, status, label) rows appended by the acceptance module
ACCEPTANCE_RESULTS: list[tuple[int, str, str]] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance checklist")
    for number, status, label in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(f"criterion {number:2d} {status}  {label}")
