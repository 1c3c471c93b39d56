import pytest
from hypothesis import settings

from exmine.eventlog import Trace

settings.register_profile("default", deadline=None)
settings.load_profile("default")


def make_trace(case_id, path, throughput=1.0, start=0.0, **attrs):
    return Trace(case_id, tuple(path), start, start + throughput, attrs)


@pytest.fixture
def trace_factory():
    return make_trace


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


_criteria: dict[int, list[str]] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        number = int(report.nodeid.split("test_criterion_")[1].split("_")[0])
        name = report.nodeid.split("::")[-1]
        _criteria.setdefault(number, []).append((name, report.outcome))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    from test_acceptance import CRITERIA

    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        results = _criteria.get(number, [])
        outcomes = [o for _, o in results]
        if not outcomes:
            status = "NOT RUN"
        elif "failed" in outcomes:
            status = "FAIL"
        elif all(o == "skipped" for o in outcomes):
            status = "SKIP"
        else:
            status = "PASS"
        terminalreporter.write_line(f"criterion {number}: {status:7} {CRITERIA[number]}")
        for name, outcome in results:
            if outcome == "failed":
                terminalreporter.write_line(f"    failed: {name}")
