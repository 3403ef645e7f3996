from __future__ import annotations

import re

_RESULTS = {}
_CRITERION = re.compile(r"test_criterion_(\d+)_(\w+)")


def pytest_runtest_makereport(item, call):
    m = _CRITERION.search(item.name)
    if not m or call.when not in ("setup", "call"):
        return
    number, title = int(m.group(1)), m.group(2).replace("_", " ")
    failed = call.excinfo is not None
    prev = _RESULTS.get(number, (title, "PASS"))[1]
    if call.when == "call" or failed:
        _RESULTS[number] = (title, "FAIL" if failed or prev == "FAIL" else "PASS")


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        title, status = _RESULTS[number]
        terminalreporter.write_line(f"criterion {number:2d} {status}: {title}")
