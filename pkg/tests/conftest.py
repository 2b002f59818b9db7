"""Prints one PASS/FAIL line per acceptance criterion after the run."""

import re

_RESULTS: dict[int, tuple[str, str]] = {}
_PATTERN = re.compile(r"test_acceptance\.py::test_criterion_(\d+)_(\w+)")


def pytest_runtest_logreport(report):
    m = _PATTERN.search(report.nodeid)
    if not m:
        return
    num, name = int(m.group(1)), m.group(2).replace("_", " ")
    failed = report.failed or (report.when == "call" and report.skipped)
    prev = _RESULTS.get(num, (name, "PASS"))[1]
    if report.when == "call" or failed:
        _RESULTS[num] = (name, "FAIL" if failed or prev == "FAIL" else "PASS")


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_RESULTS):
        name, status = _RESULTS[num]
        terminalreporter.write_line(f"criterion {num:2d} {status}: {name}")
