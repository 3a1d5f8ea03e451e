"""Shared test plumbing.

The acceptance tests double as the release gate, so their outcomes are
echoed straight to the terminal as one line per criterion, bypassing
pytest's output capture.
"""


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    module = report.nodeid.split("::")[0]
    if not module.endswith("test_acceptance.py"):
        return
    word = "PASS" if report.passed else "FAIL"
    name = report.nodeid.split("::")[-1]
    print(f"[ACCEPTANCE] {word}: {name}", flush=True)
