import warnings

import pytest

from nfbif import connectivity as conn
from nfbif.bifurcation import BranchDiscrepancyWarning, model_params
from nfbif.homogeneous import GainFunction


@pytest.fixture(autouse=True)
def _quiet_discrepancy():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BranchDiscrepancyWarning)
        yield


@pytest.fixture(scope="session")
def ring64():
    return conn.paper_tanh_ring(1.0, 64)


@pytest.fixture(scope="session")
def ring_params64(ring64):
    return model_params(ring64, 3.0, GainFunction("smooth_tanh"))


@pytest.fixture(scope="session")
def cos1d():
    """d=1 potential with three crossing modes under a ReLU gain."""
    terms = [{"k": [1], "coeff": 3.2}, {"k": [3], "coeff": 2.1}, {"k": [5], "coeff": 2.02}]
    return conn.Potential("cosine_sum", {"constant": -3.0, "terms": terms}, L=1.0, d=1, n=64)


@pytest.fixture(scope="session")
def cos1d_params(cos1d):
    return model_params(cos1d, 3.0, GainFunction("relu"))


def pytest_terminal_summary(terminalreporter):
    lines = [
        value
        for reports in terminalreporter.stats.values()
        for rep in reports
        if getattr(rep, "when", None) == "call"
        for key, value in getattr(rep, "user_properties", [])
        if key == "acceptance"
    ]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
