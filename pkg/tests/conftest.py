import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

import _report  # noqa: E402


def pytest_terminal_summary(terminalreporter):
    if not _report.LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_report.LINES):
        terminalreporter.write_line(_report.LINES[k])
