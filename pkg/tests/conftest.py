"""Per-criterion pass/fail summary for the acceptance suite."""

from collections import OrderedDict

_OUTCOMES: "OrderedDict[int, list]" = OrderedDict()
_TITLES: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion exercised by the test")


def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    # record the test body, and setup only when it errors out
    if call.when != "call" and not (call.when == "setup" and call.excinfo is not None):
        return
    number = mark.args[0]
    _TITLES.setdefault(number, mark.args[1] if len(mark.args) > 1 else "")
    _OUTCOMES.setdefault(number, []).append((item.name, call.excinfo is None))


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_OUTCOMES):
        runs = _OUTCOMES[number]
        ok = all(passed for _, passed in runs)
        failed = [name for name, passed in runs if not passed]
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {_TITLES[number]}"
        if failed:
            line += f"  (failing: {', '.join(failed)})"
        terminalreporter.write_line(line)
