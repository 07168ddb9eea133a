TITLES = {
    1: "report table format",
    2: "metric oracles",
    3: "sampler exactness",
    4: "gradient integrity",
    5: "classical filter efficacy",
    6: "self-supervised efficacy at desk scale",
    7: "directional consistency (warn-level)",
    8: "bench determinism",
}

_criterion_of = {}
_outcomes = {}


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            _criterion_of[item.nodeid] = mark.args[0]


def pytest_runtest_logreport(report):
    n = _criterion_of.get(report.nodeid)
    if n is None:
        return
    state = _outcomes.setdefault(n, {"failed": [], "passed": 0, "warnings": []})
    if report.failed:
        state["failed"].append(report.nodeid.split("::")[-1])
    elif report.when == "call" and report.passed:
        state["passed"] += 1
        state["warnings"] += [v for k, v in report.user_properties if k == "warning"]


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(TITLES):
        state = _outcomes.get(n)
        if state is None:
            continue
        if state["failed"]:
            status = "FAIL"
            detail = "failed: " + ", ".join(state["failed"])
        elif state["warnings"]:
            status = "WARN"
            detail = "; ".join(state["warnings"])
        else:
            status = "PASS"
            detail = f"{state['passed']} checks"
        tr.write_line(f"criterion {n} [{status}] {TITLES[n]}: {detail}")
