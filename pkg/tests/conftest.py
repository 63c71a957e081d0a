import numpy as np
import pytest

from rotatest.models import BUILTIN_ORDER, get_model


@pytest.fixture(params=BUILTIN_ORDER)
def model(request):
    return get_model(request.param)


@pytest.fixture
def rng():
    return np.random.default_rng(20180110)


_criteria = {}


def pytest_runtest_logreport(report):
    name = report.nodeid.rpartition("::")[2]
    if "test_acceptance.py" in report.nodeid and name.startswith("test_criterion_"):
        if report.when == "call" or report.outcome != "passed":
            _criteria[name] = "PASS" if report.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_criteria, key=lambda n: int(n.split("_")[2])):
        num = name.split("_")[2]
        label = " ".join(name.split("_")[3:])
        terminalreporter.write_line(f"criterion {num}: {_criteria[name]}  ({label})")
