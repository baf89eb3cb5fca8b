import pytest

_TITLES = {}
_DETAIL = {}
_OUTCOME = {}


@pytest.fixture
def record(request):
    """Attach a one-line measurement summary to the current acceptance criterion."""
    cid = request.node.get_closest_marker("criterion").args[0]

    def _rec(text):
        _DETAIL.setdefault(cid, []).append(text)
    return _rec


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("criterion")
        if m is not None:
            _TITLES[m.args[0]] = m.args[1]


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    for cid, title in _TITLES.items():
        if f"::test_c{cid:02d}_" in report.nodeid:
            ok = report.outcome == "passed" and not hasattr(report, "wasxfail")
            prev = _OUTCOME.get(cid, True)
            _OUTCOME[cid] = prev and ok


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOME:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for cid in sorted(_OUTCOME):
        status = "PASS" if _OUTCOME[cid] else "FAIL"
        detail = "; ".join(_DETAIL.get(cid, []))
        tr.write_line(f"[{status}] criterion {cid:2d}: {_TITLES[cid]}" + (f" | {detail}" if detail else ""))
