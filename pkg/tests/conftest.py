"""Collects results of tests marked ``acceptance`` and prints one line per
criterion at the end of the run."""

import pytest

_CRITERIA: dict = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    if report.when == "call" or report.outcome != "passed":
        number, title = marker.args
        entry = _CRITERIA.setdefault(number, {"title": title, "ok": True, "ran": False, "notes": []})
        entry["ran"] = entry["ran"] or report.when == "call"
        entry["ok"] = entry["ok"] and report.outcome == "passed"
        entry["notes"].extend(v for k, v in item.user_properties if k == "acceptance" and v not in entry["notes"])


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(_CRITERIA):
        entry = _CRITERIA[number]
        status = "PASS" if entry["ok"] and entry["ran"] else "FAIL"
        line = f"criterion {number}: {status}  {entry['title']}"
        if entry["notes"]:
            line += "  [" + "; ".join(entry["notes"]) + "]"
        terminalreporter.write_line(line)


@pytest.fixture
def note(request):
    """Attach a short measurement to the acceptance summary line."""

    def add(text):
        request.node.user_properties.append(("acceptance", text))

    return add
