"""Acceptance criteria reporting: one PASS/FAIL line per ``criterion``-marked test."""

import pytest

_RESULTS: dict[int, tuple[str, str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.fixture
def report(request):
    """Attach a one-line measurement summary to the current criterion."""

    def _report(detail: str) -> None:
        request.node.criterion_detail = detail
        print(detail)

    return _report


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when not in ("setup", "call"):
        return
    number, title = marker.args
    if rep.when == "setup" and rep.passed:
        return
    status = "PASS" if rep.passed else "FAIL"
    _RESULTS[number] = (status, title, getattr(item, "criterion_detail", ""))


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        status, title, detail = _RESULTS[number]
        line = f"criterion {number:>2}: {status}  {title}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))
