"""Collects the outcome of tests marked ``criterion`` and prints one
PASS/FAIL line per acceptance criterion at the end of the run."""
import pytest

_OUTCOMES = {}
_DETAILS = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.fixture
def report(request):
    """Attach a short measured-value summary to the current criterion."""
    marker = request.node.get_closest_marker("criterion")

    def _add(text):
        if marker is not None:
            _DETAILS.setdefault(marker.args[0], []).append(str(text))
    return _add


def pytest_runtest_logreport(report):
    if report.when not in ("setup", "call") or not hasattr(report, "criterion"):
        return
    num, title = report.criterion
    ok = report.passed if report.when == "call" else not report.failed
    prev = _OUTCOMES.get(num, (title, True))[1]
    _OUTCOMES[num] = (title, prev and ok)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        rep.criterion = (marker.args[0], marker.args[1])


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_OUTCOMES):
        title, ok = _OUTCOMES[num]
        detail = "; ".join(_DETAILS.get(num, []))
        terminalreporter.write_line(f"criterion {num} {'PASS' if ok else 'FAIL'}: {title}"
                                    + (f" [{detail}]" if detail else ""))
