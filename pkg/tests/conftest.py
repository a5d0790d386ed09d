import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=100, deadline=None)
settings.load_profile("default")

_CRITERIA: dict[int, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when != "call" and not report.failed:
        return
    number, title = marker.args
    entry = _CRITERIA.setdefault(number, {"title": title, "passed": True, "failed_parts": []})
    if report.failed:
        entry["passed"] = False
        entry["failed_parts"].append(item.name)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        e = _CRITERIA[number]
        status = "PASS" if e["passed"] else "FAIL"
        extra = "" if e["passed"] else f"  (failing: {', '.join(e['failed_parts'])})"
        terminalreporter.write_line(f"criterion {number:2d} {status}  {e['title']}{extra}")
