import os
import re

import pytest

# acceptance criterion id -> list of (test name, outcome, detail)
_RESULTS: dict[str, list] = {}

WORKERS = int(os.environ.get("AVGWAVE_WORKERS", "1"))
FULL_BUDGET = os.environ.get("AVGWAVE_FULL_BUDGET", "") not in ("", "0")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    match = re.match(r"test_(a\d+)_", item.name)
    if not match:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        detail = dict(item.user_properties).get("detail", "")
        status = "PASS" if rep.outcome == "passed" else ("SKIP" if rep.outcome == "skipped" else "FAIL")
        _RESULTS.setdefault(match.group(1).upper(), []).append((item.name, status, detail))


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_RESULTS, key=lambda k: int(k[1:])):
        entries = _RESULTS[key]
        status = "FAIL" if any(s == "FAIL" for _, s, _ in entries) else (
            "SKIP" if all(s == "SKIP" for _, s, _ in entries) else "PASS")
        details = "; ".join(d for _, _, d in entries if d)
        terminalreporter.write_line(f"{key:<4}{status}  {details}")
