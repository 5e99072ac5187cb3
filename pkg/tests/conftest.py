import re

import numpy as np
import pytest

from rwmhcert.proposal import gaussian_proposal
from rwmhcert.target import standard_normal_bundle


@pytest.fixture(scope="session")
def normal_bundle():
    return standard_normal_bundle(1)


@pytest.fixture(scope="session")
def unit_prop():
    return gaussian_proposal(1.0, 1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one summary line per acceptance criterion, printed after the run
_CRITERIA = {}


def pytest_runtest_logreport(report):
    m = re.search(r"test_criterion_(\d+)", report.nodeid)
    if not m or report.when == "teardown" or (report.when == "setup" and report.passed):
        return
    detail = dict(report.user_properties).get("detail", "")
    _CRITERIA[int(m.group(1))] = ("PASS" if report.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for n in sorted(_CRITERIA):
        verdict, detail = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n}: {verdict}  {detail}")
