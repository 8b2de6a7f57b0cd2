
import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("scamr", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("scamr")

_ACCEPTANCE = {}
_NOTES = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        name = report.nodeid.split("::")[-1]
        if hasattr(report, "wasxfail"):
            verdict = "XPASS" if report.outcome == "passed" else "XFAIL"
        else:
            verdict = "PASS" if report.outcome == "passed" else "FAIL"
        _ACCEPTANCE[name] = verdict


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE):
        note = _NOTES.get(name)
        line = f"{_ACCEPTANCE[name]:5s} {name}"
        terminalreporter.write_line(line + (f"  ({note})" if note else ""))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def note(request):
    """Attach a measured-value summary to the acceptance report line."""
    name = request.node.name

    def record(text):
        _NOTES[name] = text

    return record
