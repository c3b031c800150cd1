import re

import pytest
from hypothesis import HealthCheck, settings

from georecords.qkernel import PrecisionContext, make_model

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

Q_GRID = ("1/2", "1/3", "2/3")


@pytest.fixture(scope="session")
def ctx():
    return PrecisionContext()


@pytest.fixture(scope="session")
def half(ctx):
    return make_model("1/2", ctx)


_ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    m = re.search(r"test_acceptance\.py::test_(A\d+)_", report.nodeid)
    if not m:
        return
    key = m.group(1)
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        msg = ""
        if report.outcome == "failed":
            text = str(report.longrepr).strip().splitlines()
            errs = [line[2:].strip() for line in text if line.startswith("E ")]
            msg = errs[0] if errs else ""
        _ACCEPTANCE[key] = (report.outcome, msg)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE, key=lambda k: int(k[1:])):
        outcome, msg = _ACCEPTANCE[key]
        status = "PASS" if outcome == "passed" else "FAIL"
        line = f"{key}: {status}"
        if msg:
            line += f"  ({msg[:200]})"
        terminalreporter.write_line(line)
