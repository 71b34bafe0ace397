_RESULTS = {}


def pytest_runtest_logreport(report):
    crit = None
    for key, val in report.user_properties:
        if key == "criterion":
            crit = val
    if crit is None:
        return
    if report.when == "call" or report.outcome != "passed":
        ok, dur = _RESULTS.get(crit, (True, 0.0))
        _RESULTS[crit] = (ok and report.outcome == "passed", dur + report.duration)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(_RESULTS):
        ok, dur = _RESULTS[crit]
        word = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"criterion {crit:2d}: {word} ({dur:.2f} s)")
