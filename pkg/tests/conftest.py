import re

import pytest

CRITERIA = 12
_NODE = re.compile(r"test_criterion_(\d+)_")

# criterion number -> printed verdict line / pytest outcome, for the summary
_verdicts = {}
_outcomes = {}


@pytest.fixture
def verdict():
    """Record one acceptance line: verdict(number, title, passed, detail)."""

    def record(number, title, passed, detail):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:2d}: {title} | {detail}"
        _verdicts[number] = line
        print(line)
        return passed

    return record


def pytest_runtest_logreport(report):
    match = _NODE.search(report.nodeid)
    if match and (report.when == "call" or report.outcome != "passed"):
        _outcomes[int(match.group(1))] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in range(1, CRITERIA + 1):
        if number in _verdicts:
            line = _verdicts[number]
        elif number in _outcomes:
            line = f"[FAIL] criterion {number:2d}: raised before reaching a verdict"
        else:
            line = f"[----] criterion {number:2d}: not selected in this run"
        terminalreporter.write_line(line)
