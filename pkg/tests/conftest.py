"""Shared pytest hooks: one pass/fail line per acceptance criterion."""


def pytest_runtest_logreport(report):
    if "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::", 1)[-1]
    if report.when == "setup" and report.skipped:
        print(f"\n[acceptance] SKIP {name}", flush=True)
    elif report.when == "call":
        print(f"\n[acceptance] {'PASS' if report.passed else 'FAIL'} {name}", flush=True)
