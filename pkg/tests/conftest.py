import sys
import time
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"
sys.path.insert(0, str(Path(__file__).resolve().parent))

_criteria = {}
_durations = {}
_started = time.monotonic()
SUITE_LIMIT = 300.0
COMMAND_LIMIT = 30.0


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.fixture
def fixtures_dir():
    return FIXTURES


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    for mark in getattr(report, "criterion_marks", ()):
        _durations[report.nodeid] = report.duration
        prev = _criteria.get(mark, "PASS")
        _criteria[mark] = "PASS" if prev == "PASS" and report.passed else "FAIL"


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    report.criterion_marks = tuple(m.args[0] for m in item.iter_markers("criterion"))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    elapsed = time.monotonic() - _started
    slowest = max(_durations.values(), default=0.0)
    if 11 in _criteria:
        timing_ok = elapsed < SUITE_LIMIT and slowest < COMMAND_LIMIT
        _criteria[11] = "PASS" if _criteria[11] == "PASS" and timing_ok else "FAIL"
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        terminalreporter.write_line(f"criterion {n}: {_criteria[n]}")
    terminalreporter.write_line(
        f"suite wall-clock {elapsed:.1f} s (limit {SUITE_LIMIT:.0f} s); "
        f"slowest acceptance test {slowest:.1f} s (limit {COMMAND_LIMIT:.0f} s)")
