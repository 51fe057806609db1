import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from qbkinetic.grid import make_grid
from qbkinetic.physics import PhysicalParams

settings.register_profile("qb", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("qb")


@pytest.fixture(scope="session")
def params():
    return PhysicalParams(kappa3=0.05)


@pytest.fixture(scope="session")
def grid(params):
    return make_grid(params=params)


@pytest.fixture(scope="session")
def unit_params():
    # kappa1 = kappa2 = 1
    return PhysicalParams(kappa1_override=1.0, kappa2_override=1.0)


def gauss(a=0.6, c=1.8, w=1.0):
    return lambda u: a * np.exp(-(((np.asarray(u) - c) / w) ** 2))


@pytest.fixture(scope="session")
def grid2(params):
    return make_grid(refine=2, params=params)


@pytest.fixture(scope="session")
def random_states(grid):
    from qbkinetic.diagnostics import GaussianMixtureSampler

    return GaussianMixtureSampler(7).states(grid, 50)


# -- acceptance summary: one line per criterion --------------------------------

_ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::test_criterion_" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    num = int(name.split("_")[2])
    prev = _ACCEPTANCE.get(num, ("PASS", ""))
    if report.failed:
        prev = ("FAIL", prev[1])
    elif report.skipped:
        prev = ("SKIP", prev[1])
    detail = dict(report.user_properties).get("measured", prev[1])
    _ACCEPTANCE[num] = (prev[0], detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_ACCEPTANCE):
        status, detail = _ACCEPTANCE[num]
        terminalreporter.write_line(f"criterion {num:2d}: {status}  {detail}")
