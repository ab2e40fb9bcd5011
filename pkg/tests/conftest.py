import os
import sys
from collections import defaultdict

sys.path.insert(0, os.path.dirname(__file__))

_CRITERIA = {
    1: "two-stage coefficient regression",
    2: "spectrum regression",
    3: "20-digit constants",
    4: "verdict suite",
    5: "energy-identity property suite",
    6: "skew-symmetric balance",
    7: "Alexander identities and kappa estimate",
    8: "convergence orders",
    9: "Bochner audit",
    10: "order-condition certification",
}
_outcomes = defaultdict(list)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(k): acceptance criterion number k")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            item.user_properties.append(("criterion", mark.args[0]))


def pytest_runtest_logreport(report):
    crit = dict(report.user_properties).get("criterion")
    if crit is None:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        _outcomes[crit].append((report.nodeid.split("::")[-1], report.passed))


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for k in sorted(_CRITERIA):
        results = _outcomes.get(k)
        if not results:
            tr.write_line(f"criterion {k:>2}: NOT RUN  {_CRITERIA[k]}")
            continue
        failed = [name for name, ok in results if not ok]
        status = "PASS" if not failed else "FAIL"
        extra = f"  (failed: {', '.join(failed)})" if failed else ""
        tr.write_line(f"criterion {k:>2}: {status}  {_CRITERIA[k]}{extra}")
